"""Scripted stand-in for the human trainer.

Demonstrations chase the nearest alive prey while steering around hazards;
interventions fire when the agent's proposed move puts it within
`intervene_lookahead` clamped moves of a hazard; evaluations reward progress
toward prey. skill_epsilon, silence_prob, and reaction_delay make the
scripts as noisy, quiet, and slow as a person, so the credit-assignment and
safety machinery gets exercised the way a live session would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import (
    N_ACTIONS,
    STAY,
    EnvState,
    clamp_move,
    manhattan,
)
from .human import (
    DemoAction,
    FeedbackEvent,
    HumanEvent,
    HumanSource,
    InterveneStart,
    InterveneStop,
    OverrideAction,
    TickContext,
)


@dataclass(frozen=True)
class OracleConfig:
    skill_epsilon: float = 0.0
    intervene_lookahead: int = 2
    silence_prob: float = 0.5
    reaction_delay: int = 1
    seed: int = 0

    def validate(self) -> None:
        from .errors import ConfigError

        if not 0.0 <= self.skill_epsilon <= 1.0:
            raise ConfigError("skill_epsilon must be in [0, 1]")
        if not 0.0 <= self.silence_prob <= 1.0:
            raise ConfigError("silence_prob must be in [0, 1]")
        if self.intervene_lookahead < 1:
            raise ConfigError("intervene_lookahead must be >= 1")
        if self.reaction_delay < 0:
            raise ConfigError("reaction_delay must be >= 0")


def _nearest_prey(state: EnvState):
    alive = [(manhattan(state.learner, pos), i, pos) for i, pos in state.alive_prey()]
    if not alive:
        return None
    return min(alive)[2]


def demo_action(state: EnvState) -> int:
    """Greedy chase of the nearest alive prey, never entering a hazard when a
    non-hazard move of equal or better distance exists. Ties break on the
    lowest action index; a blocked straight line turns into a detour move
    rather than a stall, so Stay is only played when fully enclosed."""
    target = _nearest_prey(state)
    if target is None:
        return STAY
    cfg = state.config
    hazards = set(cfg.hazard_cells)
    ranked = []
    for action in range(N_ACTIONS - 1):
        cell = clamp_move(state.learner, action, cfg.width, cfg.height)
        ranked.append((cell in hazards, manhattan(cell, target), action))
    blocked, _, action = min(ranked)
    return STAY if blocked else action


def hazard_reachable(state: EnvState, cell, k: int) -> bool:
    """True iff some sequence of at most k clamped moves from cell reaches a
    hazard. Breadth-first over the move graph; other agents are frozen."""
    cfg = state.config
    hazards = set(cfg.hazard_cells)
    if not hazards:
        return False
    frontier = {cell}
    seen = {cell}
    for _ in range(k + 1):
        if frontier & hazards:
            return True
        nxt = set()
        for c in frontier:
            for action in range(N_ACTIONS - 1):  # the four moves
                n = clamp_move(c, action, cfg.width, cfg.height)
                if n not in seen:
                    seen.add(n)
                    nxt.add(n)
        frontier = nxt
    return False


def should_intervene(state: EnvState, proposed_action: int, lookahead: int) -> bool:
    cfg = state.config
    target = clamp_move(state.learner, proposed_action, cfg.width, cfg.height)
    return hazard_reachable(state, target, lookahead)


def intervention_action(state: EnvState, lookahead: int) -> int:
    """demo_action restricted to moves the overseer itself would not flag;
    Stay when everything is flagged."""
    target = _nearest_prey(state)
    cfg = state.config
    safe_moves = [
        a for a in range(N_ACTIONS - 1) if not should_intervene(state, a, lookahead)
    ]
    if not safe_moves:
        return STAY
    if target is None:
        return STAY
    ranked = [
        (manhattan(clamp_move(state.learner, a, cfg.width, cfg.height), target), a)
        for a in safe_moves
    ]
    return min(ranked)[1]


def evaluate_step(prev_state: EnvState, action: int, new_state: EnvState) -> int:
    """+1 when the learner got closer to prey or a capture landed, -1 when it
    drifted away, 0 otherwise."""
    prev_alive = prev_state.alive_prey()
    new_alive = new_state.alive_prey()
    if not prev_alive:
        return 0
    if len(new_alive) < len(prev_alive):
        return 1
    d_prev = min(manhattan(prev_state.learner, pos) for _, pos in prev_alive)
    d_new = min(manhattan(new_state.learner, pos) for _, pos in new_alive)
    if d_new < d_prev:
        return 1
    if d_new > d_prev:
        return -1
    return 0


class Oracle(HumanSource):
    """Deterministic (per seed) human source driving all four stages."""

    def __init__(self, config: OracleConfig):
        config.validate()
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self._intervening = False
        self._safe_streak = 0
        self._pending_start: int | None = None
        self._pending_feedback: list[tuple[int, int]] = []  # (due step, value)

    def begin_episode(self, stage: str, episode: int) -> None:
        self._intervening = False
        self._safe_streak = 0
        self._pending_start = None
        self._pending_feedback = []

    def poll(self, ctx: TickContext) -> list[HumanEvent]:
        if ctx.stage == "demonstration" and ctx.phase == "decide":
            return [DemoAction(self._noisy_demo(ctx.state))]
        if ctx.stage == "intervention" and ctx.phase == "decide":
            return self._intervention_poll(ctx)
        if ctx.stage == "evaluation" and ctx.phase == "outcome":
            return self._evaluation_poll(ctx)
        return []

    def export_state(self) -> dict:
        return {
            "rng": self.rng.bit_generator.state,
            "intervening": self._intervening,
            "safe_streak": self._safe_streak,
            "pending_start": self._pending_start,
            "pending_feedback": [list(p) for p in self._pending_feedback],
        }

    def import_state(self, state: dict) -> None:
        self.rng = np.random.default_rng(0)
        self.rng.bit_generator.state = state["rng"]
        self._intervening = state["intervening"]
        self._safe_streak = state["safe_streak"]
        self._pending_start = state["pending_start"]
        self._pending_feedback = [tuple(p) for p in state["pending_feedback"]]

    def _noisy_demo(self, state: EnvState) -> int:
        if self.config.skill_epsilon > 0 and self.rng.random() < self.config.skill_epsilon:
            return int(self.rng.integers(N_ACTIONS))
        return demo_action(state)

    def _intervention_poll(self, ctx: TickContext) -> list[HumanEvent]:
        k = self.config.intervene_lookahead
        if self._intervening:
            if not should_intervene(ctx.state, demo_action(ctx.state), k):
                self._safe_streak += 1
            else:
                self._safe_streak = 0
            if self._safe_streak >= 2:
                self._intervening = False
                self._safe_streak = 0
                return [InterveneStop()]
            return [OverrideAction(intervention_action(ctx.state, k))]
        if self._pending_start is not None and ctx.step >= self._pending_start:
            self._pending_start = None
            self._intervening = True
            self._safe_streak = 0
            return [InterveneStart(), OverrideAction(intervention_action(ctx.state, k))]
        if self._pending_start is None and should_intervene(ctx.state, ctx.proposed_action, k):
            if self.config.reaction_delay == 0:
                self._intervening = True
                self._safe_streak = 0
                return [InterveneStart(), OverrideAction(intervention_action(ctx.state, k))]
            self._pending_start = ctx.step + self.config.reaction_delay
        return []

    def _evaluation_poll(self, ctx: TickContext) -> list[HumanEvent]:
        signal = evaluate_step(ctx.prev_state, ctx.prev_action, ctx.state)
        if signal != 0 and self.rng.random() >= self.config.silence_prob:
            self._pending_feedback.append(
                (ctx.step + self.config.reaction_delay, signal)
            )
        due = [p for p in self._pending_feedback if p[0] <= ctx.step]
        self._pending_feedback = [p for p in self._pending_feedback if p[0] > ctx.step]
        return [FeedbackEvent(value=v, issued_at_step=s) for s, v in due]
