"""Live-human pathway: a WebSocket service around the training cycle.

The cycle runs on a dedicated driver thread at a human tick rate. A network
side (asyncio) accepts one controlling client plus spectators, enqueues
their messages, and broadcasts a state frame every environment tick. The two
sides touch only through the message queue and a tick gate, so the stage
procedures run exactly as they do headless.

Wire protocol (version 1): one JSON document per WebSocket text frame, and
the same documents newline-delimited in the session log. See
docs/protocol.md for the field-by-field schema. Every client message is
applied at the first tick boundary after arrival, in arrival order; the
session log records the applied tick, which is what makes a recorded session
replayable bit-for-bit.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import threading
from typing import Optional

from .config import CycleConfig, config_fingerprint
from .errors import EpisodeAborted, ReplayError
from .human import (
    AdvanceStage,
    DemoAction,
    FeedbackEvent,
    HumanEvent,
    HumanSource,
    InterveneStart,
    InterveneStop,
    OverrideAction,
    TickContext,
)
from . import orchestrator

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


class _SessionClosed(BaseException):
    """Raised inside the driver thread when the socket side shuts down; a
    BaseException so stage-level EpisodeAborted handling cannot swallow it."""

CLIENT_KINDS = (
    "hello", "demo_action", "intervene", "override_action", "feedback",
    "advance_stage", "pause", "resume",
)

# which message kinds each stage consumes; pause/resume/hello are stage-free
STAGE_LEGAL = {
    "demonstration": {"demo_action", "advance_stage"},
    "intervention": {"intervene", "override_action", "advance_stage"},
    "evaluation": {"feedback", "advance_stage"},
    # feedback is accepted during autonomous RL but only logged, never learned from
    "rl": {"feedback", "advance_stage"},
}


def validate_client_message(msg: dict) -> Optional[str]:
    """Schema check only; stage legality is checked at application time."""
    if not isinstance(msg, dict):
        return "message must be a JSON object"
    kind = msg.get("type")
    if kind not in CLIENT_KINDS:
        return f"unknown message type {kind!r}"
    if kind in ("demo_action", "override_action"):
        action = msg.get("action")
        if not isinstance(action, int) or not 0 <= action <= 4:
            return "action must be an integer in 0..4"
    if kind == "intervene":
        if msg.get("mode") not in ("start", "stop"):
            return "intervene mode must be 'start' or 'stop'"
    if kind == "feedback":
        if msg.get("value") not in (-1, 1):
            return "feedback value must be -1 or +1"
    if kind == "hello":
        if msg.get("protocol_version") != PROTOCOL_VERSION:
            return f"protocol version mismatch (server speaks {PROTOCOL_VERSION})"
    return None


def _translate(msg: dict, stage: str, step: int) -> tuple[list[HumanEvent], Optional[str]]:
    """Client message -> human events, or a rejection reason. Feedback during
    the RL stage is accepted but produces no event."""
    kind = msg["type"]
    if kind in ("hello", "pause", "resume", "_abort"):
        return [], None
    if kind not in STAGE_LEGAL.get(stage, set()):
        return [], f"{kind} is not available during the {stage} stage"
    if kind == "demo_action":
        return [DemoAction(msg["action"])], None
    if kind == "intervene":
        return [InterveneStart() if msg["mode"] == "start" else InterveneStop()], None
    if kind == "override_action":
        return [OverrideAction(msg["action"])], None
    if kind == "feedback":
        if stage == "rl":
            return [], None
        return [FeedbackEvent(value=msg["value"], issued_at_step=step)], None
    if kind == "advance_stage":
        return [AdvanceStage()], None
    return [], f"unhandled message type {kind!r}"


class SessionRecorder:
    """Append-only newline-delimited JSON session log."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._lock = threading.Lock()
        self._fh = open(path, "w") if path else None

    def write(self, kind: str, payload: dict) -> None:
        if self._fh is None:
            return
        line = json.dumps({"kind": kind, **payload}, sort_keys=True, separators=(",", ":"))
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class QueueSource(HumanSource):
    """Human source fed by the network queue; one poll per environment tick."""

    def __init__(self, server: "SessionServer"):
        self.server = server
        self.tick = 0
        self.stage = "demonstration"
        self.episode = 0
        self.intervening = False
        self.counters = {"demos": 0, "interventions": 0, "feedback": 0}
        self.last_episode_score: Optional[float] = None
        self._deferred_feedback: list[FeedbackEvent] = []

    def begin_episode(self, stage: str, episode: int) -> None:
        self.stage = stage
        self.episode = episode
        self.intervening = False
        self._deferred_feedback = []

    def note_episode_end(self, stage: str, episode: int, score: float) -> None:
        self.last_episode_score = score

    def poll(self, ctx: TickContext) -> list[HumanEvent]:
        self.stage = ctx.stage
        if ctx.phase == "outcome":
            due = self._deferred_feedback
            self._deferred_feedback = []
            out: list[HumanEvent] = []
            for ev in due:
                out.append(FeedbackEvent(value=ev.value, issued_at_step=ctx.step))
                self.counters["feedback"] += 1
            return out

        frame = self._build_frame(ctx)
        self.server.emit_frame(frame)
        self.tick += 1
        self.server.wait_tick(self)
        raw = self.server.drain_messages()

        events: list[HumanEvent] = []
        for msg in raw:
            if msg.get("type") == "_abort":
                self.server.recorder.write("client", {"tick": self.tick, "msg": msg})
                if ctx.stage == "demonstration":
                    raise EpisodeAborted("controller disconnected mid-demonstration")
                if self.intervening:
                    self.intervening = False
                    events.append(InterveneStop())
                    log.warning("controller left mid-intervention; span closed at tick %d", self.tick)
                continue
            translated, rejection = _translate(msg, ctx.stage, ctx.step)
            self.server.recorder.write("client", {"tick": self.tick, "msg": msg})
            if rejection is not None:
                self.server.reply_error(rejection)
                continue
            for ev in translated:
                if isinstance(ev, FeedbackEvent):
                    self._deferred_feedback.append(ev)
                elif isinstance(ev, InterveneStart):
                    if not self.intervening:
                        self.intervening = True
                        self.counters["interventions"] += 1
                        events.append(ev)
                elif isinstance(ev, InterveneStop):
                    if self.intervening:
                        self.intervening = False
                        events.append(ev)
                else:
                    if isinstance(ev, DemoAction):
                        self.counters["demos"] += 1
                    events.append(ev)
        return events

    def _build_frame(self, ctx: TickContext) -> dict:
        state = ctx.state
        cfg = state.config
        return {
            "type": "frame",
            "protocol_version": PROTOCOL_VERSION,
            "session_id": self.server.session_id,
            "tick": self.tick,
            "stage": ctx.stage,
            "episode": ctx.episode,
            "step": ctx.step,
            "grid": {
                "width": cfg.width,
                "height": cfg.height,
                "hazards": [list(c) for c in cfg.hazard_cells],
                "predators": [
                    {"x": p[0], "y": p[1], "learner": i == 0}
                    for i, p in enumerate(state.predators)
                ],
                "prey": [
                    {"x": p.pos[0], "y": p.pos[1], "alive": p.alive} for p in state.prey
                ],
            },
            "agent_proposed_action": ctx.proposed_action,
            "controller": "human" if (ctx.stage == "demonstration" or self.intervening) else "agent",
            "last_episode_score": self.last_episode_score,
            "counters": dict(self.counters),
        }


class SessionServer:
    """Owns the socket side; pair it with a driver thread running the cycle."""

    def __init__(
        self,
        config: CycleConfig,
        seed: int,
        host: str = "127.0.0.1",
        port: int = 0,
        tick_ms: int = 300,
        session_log: Optional[str] = None,
        out_dir: Optional[str] = None,
    ):
        config.validate()
        self.config = config
        self.seed = seed
        self.host = host
        self.requested_port = port
        self.tick_ms = tick_ms
        self.out_dir = out_dir
        self.session_id = f"{config_fingerprint(config)[:12]}-{seed}"
        self.recorder = SessionRecorder(session_log)
        self.source = QueueSource(self)

        self.ready = threading.Event()
        self.done = threading.Event()
        self.port: Optional[int] = None
        self.report: Optional[orchestrator.CycleReport] = None
        self.driver_error: Optional[BaseException] = None

        self._tick_event = threading.Event()
        self._pending: list[dict] = []
        self._pending_lock = threading.Lock()
        self._paused = False
        self._controller = None
        self._spectators: set = set()
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._frame_q: Optional[asyncio.Queue] = None

    # -- driver-thread side -------------------------------------------------

    def wait_tick(self, source: QueueSource) -> None:
        while not self._tick_event.wait(timeout=1.0):
            if self.done.is_set():
                raise _SessionClosed()
        self._tick_event.clear()
        if self.done.is_set():
            raise _SessionClosed()

    def drain_messages(self) -> list[dict]:
        with self._pending_lock:
            out = self._pending
            self._pending = []
        return out

    def emit_frame(self, frame: dict) -> None:
        self.recorder.write("frame", {"tick": frame["tick"], "frame": frame})
        if self._loop is not None and self._frame_q is not None:
            self._loop.call_soon_threadsafe(self._frame_q.put_nowait, ("frame", frame))

    def reply_error(self, message: str) -> None:
        payload = {"type": "error", "protocol_version": PROTOCOL_VERSION, "message": message}
        if self._loop is not None and self._frame_q is not None:
            self._loop.call_soon_threadsafe(self._frame_q.put_nowait, ("error", payload))

    def _drive(self) -> None:
        try:
            self.report = orchestrator.run_cycle(self.config, self.source, self.seed)
        except _SessionClosed:
            pass
        except BaseException as exc:  # surfaced to the caller of run_forever
            self.driver_error = exc
        finally:
            if self.out_dir and self.report is not None:
                os.makedirs(self.out_dir, exist_ok=True)
                orchestrator.write_metrics(
                    self.report.records,
                    os.path.join(self.out_dir, f"metrics_seed{self.seed}.csv"),
                )
                orchestrator.write_summary(
                    [self.report], os.path.join(self.out_dir, "summary.json")
                )
            if self._loop is not None and self._frame_q is not None:
                self._loop.call_soon_threadsafe(
                    self._frame_q.put_nowait,
                    ("done", {"type": "done", "protocol_version": PROTOCOL_VERSION}),
                )

    # -- asyncio side ---------------------------------------------------------

    async def _handler(self, connection) -> None:
        role = "controller" if self._controller is None else "spectator"
        if role == "controller":
            self._controller = connection
        else:
            self._spectators.add(connection)
        try:
            await connection.send(json.dumps({
                "type": "hello",
                "protocol_version": PROTOCOL_VERSION,
                "session_id": self.session_id,
                "role": role,
                "tick_ms": self.tick_ms,
            }))
            async for raw in connection:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await connection.send(json.dumps({
                        "type": "error", "protocol_version": PROTOCOL_VERSION,
                        "message": "not valid JSON",
                    }))
                    continue
                problem = validate_client_message(msg)
                if problem is not None:
                    await connection.send(json.dumps({
                        "type": "error", "protocol_version": PROTOCOL_VERSION,
                        "message": problem,
                    }))
                    if msg.get("type") == "hello":
                        break  # version mismatch is fatal for that client
                    continue
                kind = msg.get("type")
                if kind == "hello":
                    continue
                if role != "controller":
                    await connection.send(json.dumps({
                        "type": "error", "protocol_version": PROTOCOL_VERSION,
                        "message": "spectators cannot send inputs",
                    }))
                    continue
                if kind == "pause":
                    self._paused = True
                    continue
                if kind == "resume":
                    self._paused = False
                    continue
                with self._pending_lock:
                    self._pending.append(msg)
        finally:
            if connection is self._controller:
                self._controller = None
                with self._pending_lock:
                    self._pending.append({"type": "_abort"})
                # wake the driver so a demonstration episode can abort
                self._tick_event.set()
            else:
                self._spectators.discard(connection)

    async def _tick_task(self) -> None:
        period = self.tick_ms / 1000.0
        while not self.done.is_set():
            await asyncio.sleep(period)
            if self._paused:
                continue
            if self.source.stage == "demonstration" and self._controller is None:
                continue  # human-required stage pauses without a controller
            self._tick_event.set()

    async def _broadcast_task(self) -> None:
        while True:
            kind, payload = await self._frame_q.get()
            data = json.dumps(payload, sort_keys=True)
            targets = [c for c in [self._controller, *self._spectators] if c is not None]
            for conn in targets:
                try:
                    await conn.send(data)
                except Exception:
                    pass
            if kind == "done":
                return

    async def _serve(self) -> None:
        from websockets.asyncio.server import serve as ws_serve

        self._loop = asyncio.get_running_loop()
        self._frame_q = asyncio.Queue()
        self.recorder.write("meta", {
            "protocol_version": PROTOCOL_VERSION,
            "fingerprint": config_fingerprint(self.config),
            "seed": self.seed,
            "session_id": self.session_id,
            "tick_ms": self.tick_ms,
        })
        async with ws_serve(self._handler, self.host, self.requested_port) as server:
            self.port = server.sockets[0].getsockname()[1]
            driver = threading.Thread(target=self._drive, name="cycle-driver", daemon=True)
            driver.start()
            self.ready.set()
            tick = asyncio.create_task(self._tick_task())
            try:
                await self._broadcast_task()  # returns once the driver is done
            finally:
                self.done.set()
                self._tick_event.set()
                tick.cancel()
                driver.join(timeout=10.0)
                self.recorder.close()

    def run_forever(self) -> None:
        """Blocking entry point; returns when the cycle completes."""
        try:
            asyncio.run(self._serve())
        finally:
            self.ready.set()
            self.done.set()
        if self.driver_error is not None:
            raise self.driver_error


def serve(
    config: CycleConfig,
    seed: int,
    host: str = "127.0.0.1",
    port: int = 8765,
    tick_ms: int = 300,
    session_log: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> orchestrator.CycleReport:
    server = SessionServer(
        config, seed, host=host, port=port, tick_ms=tick_ms,
        session_log=session_log, out_dir=out_dir,
    )
    log.info("session %s listening on ws://%s:%s", server.session_id, host, port)
    server.run_forever()
    return server.report


class RecordedSource(HumanSource):
    """Replays a session log headlessly: the recorded client messages are
    re-applied at their recorded ticks, nothing is paced or broadcast."""

    def __init__(self, events_by_tick: dict, total_ticks: int):
        self.events_by_tick = events_by_tick
        self.total_ticks = total_ticks
        self.tick = 0
        self.intervening = False
        self._deferred_feedback: list[FeedbackEvent] = []

    def begin_episode(self, stage: str, episode: int) -> None:
        self.intervening = False
        self._deferred_feedback = []

    def poll(self, ctx: TickContext) -> list[HumanEvent]:
        if ctx.phase == "outcome":
            due = self._deferred_feedback
            self._deferred_feedback = []
            return [FeedbackEvent(value=ev.value, issued_at_step=ctx.step) for ev in due]
        self.tick += 1
        events: list[HumanEvent] = []
        for msg in self.events_by_tick.get(self.tick, []):
            if msg.get("type") == "_abort":
                if ctx.stage == "demonstration":
                    raise EpisodeAborted("recorded abort")
                if self.intervening:
                    self.intervening = False
                    events.append(InterveneStop())
                continue
            translated, rejection = _translate(msg, ctx.stage, ctx.step)
            if rejection is not None:
                continue
            for ev in translated:
                if isinstance(ev, FeedbackEvent):
                    self._deferred_feedback.append(ev)
                elif isinstance(ev, InterveneStart):
                    if not self.intervening:
                        self.intervening = True
                        events.append(ev)
                elif isinstance(ev, InterveneStop):
                    if self.intervening:
                        self.intervening = False
                        events.append(ev)
                else:
                    events.append(ev)
        return events


def replay_session(path: str, config: CycleConfig) -> tuple[RecordedSource, int]:
    """Parse a session log into a replayable source; returns (source, seed)."""
    events_by_tick: dict[int, list[dict]] = {}
    meta = None
    max_tick = 0
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ReplayError(
                        f"{path}:{lineno}: truncated or corrupt record "
                        f"(last good tick {max_tick}): {exc}"
                    )
                kind = doc.get("kind")
                if kind == "meta":
                    meta = doc
                elif kind == "client":
                    tick = int(doc["tick"])
                    events_by_tick.setdefault(tick, []).append(doc["msg"])
                    max_tick = max(max_tick, tick)
                elif kind == "frame":
                    max_tick = max(max_tick, int(doc["tick"]))
    except FileNotFoundError:
        raise ReplayError(f"session log not found: {path}")
    if meta is None:
        raise ReplayError(f"{path}: no meta record; not a session log")
    if meta.get("protocol_version") != PROTOCOL_VERSION:
        raise ReplayError(f"{path}: protocol version {meta.get('protocol_version')} unsupported")
    if meta.get("fingerprint") != config_fingerprint(config):
        raise ReplayError(f"{path}: session was recorded under a different configuration")
    return RecordedSource(events_by_tick, max_tick), int(meta["seed"])
