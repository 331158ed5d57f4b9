"""Drives a full training cycle and owns its persistence.

A cycle runs the stages in order, one episode at a time, consulting the
switching criteria after every episode and forcing an advance (with a
warning) when a stage hits its cap. Everything mutable lives in CycleState,
which serializes to a versioned JSON checkpoint: restoring and continuing
reproduces the uninterrupted run record for record. Metrics go to a CSV
whose bytes are a pure function of (config, seed).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import env as envmod
from .config import STAGE_ORDER, CycleConfig, config_fingerprint
from .env import observe
from .errors import CheckpointError, EpisodeAborted
from .human import HumanSource
from .nets import (
    Params,
    init_optim,
    init_params,
    optim_from_dict,
    optim_to_dict,
    params_from_dict,
    params_to_dict,
    policy_probs,
)
from .oracle import Oracle
from .stages import (
    DatasetEntry,
    EpisodeLog,
    HumanDataset,
    Model,
    collect_demonstrations,
    learn_reward_model,
    run_lfe_episode,
    run_lfi_episode,
    run_rl_episode,
    train_bc,
)
from .switching import SwitchSignals, evaluate_switch

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
MAX_RECENT_PAIRS = 256

CSV_COLUMNS = (
    "seed", "stage", "episode", "captures", "steps_to_first_capture",
    "hazard_hit", "score", "interventions", "feedback",
    "mean_abs_td_error", "actor_loss",
)


@dataclass
class EpisodeRecord:
    seed: int
    stage: str
    episode: int
    captures: int
    steps_to_first_capture: int
    hazard_hit: bool
    score: float
    interventions: int
    feedback: int
    mean_abs_td_error: float
    actor_loss: float
    wall_ms: float  # not written to the CSV: it would break bit-reproducibility

    def csv_row(self) -> list[str]:
        return [
            str(self.seed), self.stage, str(self.episode), str(self.captures),
            str(self.steps_to_first_capture), str(int(self.hazard_hit)),
            repr(self.score), str(self.interventions), str(self.feedback),
            repr(self.mean_abs_td_error), repr(self.actor_loss),
        ]


@dataclass
class CycleState:
    seed: int
    fingerprint: str
    stage_list: tuple[str, ...]
    stage: str
    episode_index: int
    stage_episodes: dict
    actor: Model
    critic: Model
    reward: Model
    dataset: HumanDataset
    signals: SwitchSignals
    rngs: dict
    switch_reasons: dict = field(default_factory=dict)
    bc_loss: Optional[float] = None


@dataclass
class CycleReport:
    seed: int
    fingerprint: str
    records: list[EpisodeRecord]
    stage_episode_counts: dict
    switch_reasons: dict
    completed: bool
    final_eval_score: Optional[float] = None
    final_eval_scores: list[float] = field(default_factory=list)
    bc_loss: Optional[float] = None
    wall_ms: float = 0.0
    state: Optional["CycleState"] = None  # final in-memory state; not serialized


def make_oracle(config: CycleConfig, run_seed: int) -> Oracle:
    derived = int(np.random.SeedSequence([config.oracle.seed, run_seed]).generate_state(1)[0])
    return Oracle(dataclasses.replace(config.oracle, seed=derived))


def _new_models(config: CycleConfig, seed: int) -> tuple[Model, Model, Model]:
    hidden = config.hidden_sizes
    actor_dims = (envmod.OBS_SIZE, *hidden, envmod.N_ACTIONS)
    scalar_dims = (envmod.OBS_SIZE + envmod.N_ACTIONS, *hidden, 1)
    root = np.random.SeedSequence([seed, 17])
    k_actor, k_critic, k_reward = root.spawn(3)
    actor = init_params(actor_dims, k_actor)
    critic = init_params(scalar_dims, k_critic)
    reward = init_params(scalar_dims, k_reward)
    return (
        Model(actor, init_optim(actor, config.hp.lr_actor)),
        Model(critic, init_optim(critic, config.hp.lr_critic)),
        Model(reward, init_optim(reward, config.hp.lr_reward)),
    )


def init_cycle_state(
    config: CycleConfig,
    seed: int,
    stages: Optional[Sequence[str]] = None,
    initial_models: Optional[tuple[Model, Model, Model]] = None,
) -> CycleState:
    config.validate()
    stage_list = tuple(stages or STAGE_ORDER)
    for s in stage_list:
        if s not in STAGE_ORDER:
            raise CheckpointError(f"unknown stage {s!r}")
    actor, critic, reward = initial_models or _new_models(config, seed)
    root = np.random.SeedSequence([seed, 29])
    k_episodes, k_actions, k_training, k_eval = root.spawn(4)
    rngs = {
        "episode_seeds": np.random.default_rng(k_episodes),
        "actions": np.random.default_rng(k_actions),
        "training": np.random.default_rng(k_training),
        "eval": np.random.default_rng(k_eval),
    }
    return CycleState(
        seed=seed,
        fingerprint=config_fingerprint(config),
        stage_list=stage_list,
        stage=stage_list[0],
        episode_index=0,
        stage_episodes={s: 0 for s in STAGE_ORDER},
        actor=actor,
        critic=critic,
        reward=reward,
        dataset=HumanDataset(),
        signals=SwitchSignals(),
        rngs=rngs,
    )


def _record_from_log(state: CycleState, ep_log: EpisodeLog, episode: int, wall_ms: float) -> EpisodeRecord:
    sample = ep_log.sample
    td = ep_log.td_errors
    return EpisodeRecord(
        seed=state.seed,
        stage=ep_log.stage,
        episode=episode,
        captures=sample.captures,
        steps_to_first_capture=sample.steps_to_first_capture,
        hazard_hit=sample.hazard_hit,
        score=sample.score,
        interventions=len(ep_log.spans),
        feedback=ep_log.feedback_count,
        mean_abs_td_error=float(np.mean(np.abs(td))) if td else 0.0,
        actor_loss=ep_log.actor_loss,
        wall_ms=wall_ms,
    )


def _update_signals(signals: SwitchSignals, ep_log: EpisodeLog, demo_pairs_added: int) -> None:
    signals.performance_history.append(ep_log.sample)
    signals.episodes_in_stage += 1
    signals.demo_pairs += demo_pairs_added
    signals.interventions += len(ep_log.spans)
    signals.feedback_events += ep_log.feedback_count
    signals.recent_human_pairs.extend(ep_log.human_pairs)
    signals.recent_agent_pairs.extend(ep_log.agent_pairs)
    del signals.recent_human_pairs[:-MAX_RECENT_PAIRS]
    del signals.recent_agent_pairs[:-MAX_RECENT_PAIRS]
    if ep_log.manual_advance:
        signals.manual_flag = True


def _next_episode_seed(state: CycleState) -> int:
    return int(state.rngs["episode_seeds"].integers(2**63))


def run_cycle(
    config: CycleConfig,
    human_source: HumanSource,
    seed: int,
    state: Optional[CycleState] = None,
    stages: Optional[Sequence[str]] = None,
    max_total_episodes: Optional[int] = None,
    checkpoint_path: Optional[str] = None,
    checkpoint_every: int = 0,
    on_record: Optional[Callable[[EpisodeRecord], None]] = None,
) -> CycleReport:
    """Execute the staged cycle with the given human source.

    Passing a restored CycleState continues an interrupted run; the human
    source is rewound from the checkpoint at the same time. max_total_episodes
    bounds this invocation (the cycle can be finished by a later call).
    """
    t_start = time.perf_counter()
    config.validate()
    if state is None:
        state = init_cycle_state(config, seed, stages=stages)
    hp = config.hp
    switch_cfg = config.switch_config()
    records: list[EpisodeRecord] = []
    episodes_this_call = 0

    while state.stage != "done":
        if max_total_episodes is not None and episodes_this_call >= max_total_episodes:
            break
        t0 = time.perf_counter()
        episode_seed = _next_episode_seed(state)
        episode_id = state.episode_index
        demo_pairs_added = 0

        if state.stage == "demonstration":
            try:
                delta, logs = collect_demonstrations(
                    config.env, human_source, 1, [episode_seed], episode_id_start=episode_id
                )
            except EpisodeAborted:
                log.warning("demonstration episode aborted; discarded, will rerun")
                continue
            state.dataset.extend(delta)
            ep_log = logs[0]
            demo_pairs_added = len(delta)
        elif state.stage == "intervention":
            state.actor, state.critic, state.reward, ep_log = run_lfi_episode(
                config.env, state.actor, state.critic, state.reward, human_source,
                state.dataset, hp, episode_seed, episode_id,
                state.rngs["actions"], state.rngs["training"],
            )
        elif state.stage == "evaluation":
            state.actor, state.critic, state.reward, ep_log = run_lfe_episode(
                config.env, state.actor, state.critic, state.reward, human_source,
                hp, episode_seed, episode_id, state.rngs["actions"],
            )
        else:  # rl
            state.actor, state.critic, ep_log = run_rl_episode(
                config.env, state.actor, state.critic, state.reward, hp,
                episode_seed, episode_id, state.rngs["actions"],
                human_source=human_source,
            )

        _update_signals(state.signals, ep_log, demo_pairs_added)
        state.stage_episodes[state.stage] += 1
        state.episode_index += 1
        episodes_this_call += 1
        wall_ms = (time.perf_counter() - t0) * 1000.0
        record = _record_from_log(state, ep_log, episode_id, wall_ms)
        records.append(record)
        if on_record is not None:
            on_record(record)

        decision = evaluate_switch(
            state.stage, switch_cfg, state.signals,
            critic_params=state.critic.params, actor_params=state.actor.params,
        )
        forced = state.signals.episodes_in_stage >= config.stages[state.stage].cap
        if decision.advance or forced:
            reason = decision.reason if decision.advance else "cap"
            if not decision.advance:
                log.warning("stage %s hit its cap without its criterion firing; advancing", state.stage)
            state.switch_reasons[state.stage] = reason
            if state.stage == "demonstration" and len(state.dataset) > 0:
                actor_params, state.bc_loss = train_bc(
                    state.dataset, state.actor.params, hp, state.rngs["training"]
                )
                state.actor = Model(actor_params, state.actor.optim)
                reward_params, _ = learn_reward_model(
                    list(state.dataset), state.reward.params, hp, state.rngs["training"]
                )
                state.reward = Model(reward_params, state.reward.optim)
            idx = state.stage_list.index(state.stage)
            state.stage = state.stage_list[idx + 1] if idx + 1 < len(state.stage_list) else "done"
            state.signals.episodes_in_stage = 0
            state.signals.manual_flag = False

        if checkpoint_path and checkpoint_every and state.episode_index % checkpoint_every == 0:
            checkpoint(state, checkpoint_path, human_source=human_source)

    if checkpoint_path and state.stage != "done":
        checkpoint(state, checkpoint_path, human_source=human_source)

    report = CycleReport(
        seed=state.seed,
        fingerprint=state.fingerprint,
        records=records,
        stage_episode_counts=dict(state.stage_episodes),
        switch_reasons=dict(state.switch_reasons),
        completed=state.stage == "done",
        bc_loss=state.bc_loss,
        state=state,
    )
    if state.stage == "done":
        scores = greedy_eval(config, state.actor.params, state.rngs["eval"], config.eval_episodes)
        report.final_eval_scores = scores
        report.final_eval_score = float(np.mean(scores)) if scores else None
    report.wall_ms = (time.perf_counter() - t_start) * 1000.0
    return report


def greedy_eval(
    config: CycleConfig, actor_params: Params, rng: np.random.Generator, n_episodes: int
) -> list[float]:
    """Score the argmax policy over fresh episodes; no learning happens."""
    scores = []
    for _ in range(n_episodes):
        ep_seed = int(rng.integers(2**63))
        state = envmod.reset(dataclasses.replace(config.env, seed=ep_seed))
        events = []
        while not state.terminal:
            probs = policy_probs(actor_params, observe(state))
            state, ev = envmod.step(state, int(np.argmax(probs)))
            events.append(ev)
        scores.append(envmod.episode_score(events, config.env.max_steps).score)
    return scores


def _model_to_dict(model: Model) -> dict:
    return {"params": params_to_dict(model.params), "optim": optim_to_dict(model.optim)}


def _model_from_dict(d: dict) -> Model:
    return Model(params_from_dict(d["params"]), optim_from_dict(d["optim"]))


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _rng_from_state(state_dict: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = state_dict
    return rng


def _pairs_to_jsonable(pairs) -> list:
    return [[obs.tolist(), int(action)] for obs, action in pairs]


def _pairs_from_jsonable(raw) -> list:
    return [(np.array(obs, dtype=float), int(action)) for obs, action in raw]


def checkpoint(state: CycleState, path: str, human_source: Optional[HumanSource] = None) -> None:
    """Versioned, self-describing snapshot; the write is atomic."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "fingerprint": state.fingerprint,
        "seed": state.seed,
        "stage_list": list(state.stage_list),
        "stage": state.stage,
        "episode_index": state.episode_index,
        "stage_episodes": state.stage_episodes,
        "switch_reasons": state.switch_reasons,
        "bc_loss": state.bc_loss,
        "models": {
            "actor": _model_to_dict(state.actor),
            "critic": _model_to_dict(state.critic),
            "reward": _model_to_dict(state.reward),
        },
        "dataset": [
            {
                "obs": e.obs.tolist(),
                "action": int(e.action),
                "source": e.source,
                "episode_id": int(e.episode_id),
                "step_index": int(e.step_index),
            }
            for e in state.dataset
        ],
        "signals": {
            "performance_history": [
                {
                    "captures": s.captures,
                    "steps_to_first_capture": s.steps_to_first_capture,
                    "hazard_hit": s.hazard_hit,
                    "score": s.score,
                }
                for s in state.signals.performance_history
            ],
            "episodes_in_stage": state.signals.episodes_in_stage,
            "demo_pairs": state.signals.demo_pairs,
            "interventions": state.signals.interventions,
            "feedback_events": state.signals.feedback_events,
            "recent_human_pairs": _pairs_to_jsonable(state.signals.recent_human_pairs),
            "recent_agent_pairs": _pairs_to_jsonable(state.signals.recent_agent_pairs),
            "manual_flag": state.signals.manual_flag,
        },
        "rngs": {name: _rng_state(rng) for name, rng in state.rngs.items()},
        "human_source": human_source.export_state() if human_source else {},
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
    os.replace(tmp, path)


def restore(
    path: str, config: CycleConfig, human_source: Optional[HumanSource] = None
) -> CycleState:
    """Load a checkpoint, verifying version and config fingerprint; optionally
    rewinds the human source to its checkpointed state."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}")
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is corrupt: {exc}")
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"checkpoint version {version} != supported {CHECKPOINT_VERSION}")
    fingerprint = config_fingerprint(config)
    if payload.get("fingerprint") != fingerprint:
        raise CheckpointError("checkpoint belongs to a different configuration")
    try:
        from .env import PerformanceSample

        signals_d = payload["signals"]
        signals = SwitchSignals(
            performance_history=[
                PerformanceSample(
                    captures=s["captures"],
                    steps_to_first_capture=s["steps_to_first_capture"],
                    hazard_hit=s["hazard_hit"],
                    score=s["score"],
                )
                for s in signals_d["performance_history"]
            ],
            episodes_in_stage=signals_d["episodes_in_stage"],
            demo_pairs=signals_d["demo_pairs"],
            interventions=signals_d["interventions"],
            feedback_events=signals_d["feedback_events"],
            recent_human_pairs=_pairs_from_jsonable(signals_d["recent_human_pairs"]),
            recent_agent_pairs=_pairs_from_jsonable(signals_d["recent_agent_pairs"]),
            manual_flag=signals_d["manual_flag"],
        )
        state = CycleState(
            seed=payload["seed"],
            fingerprint=payload["fingerprint"],
            stage_list=tuple(payload["stage_list"]),
            stage=payload["stage"],
            episode_index=payload["episode_index"],
            stage_episodes=payload["stage_episodes"],
            actor=_model_from_dict(payload["models"]["actor"]),
            critic=_model_from_dict(payload["models"]["critic"]),
            reward=_model_from_dict(payload["models"]["reward"]),
            dataset=HumanDataset([
                DatasetEntry(
                    obs=np.array(e["obs"], dtype=float),
                    action=e["action"],
                    source=e["source"],
                    episode_id=e["episode_id"],
                    step_index=e["step_index"],
                )
                for e in payload["dataset"]
            ]),
            signals=signals,
            rngs={name: _rng_from_state(s) for name, s in payload["rngs"].items()},
            switch_reasons=payload["switch_reasons"],
            bc_loss=payload["bc_loss"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"checkpoint {path} is missing fields: {exc}") from exc
    if human_source is not None:
        human_source.import_state(payload.get("human_source", {}))
    return state


def write_metrics(records: Sequence[EpisodeRecord], path: str) -> None:
    """Fixed-header CSV, one record per row; floats keep full precision."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in records:
                fh.write(",".join(r.csv_row()) + "\n")
    except OSError as exc:
        raise CheckpointError(f"cannot write metrics to {path}: {exc}") from exc


def write_summary(reports: Sequence[CycleReport], path: str, extra: Optional[dict] = None) -> None:
    payload = {
        "runs": [
            {
                "seed": r.seed,
                "fingerprint": r.fingerprint,
                "stage_episode_counts": r.stage_episode_counts,
                "switch_reasons": r.switch_reasons,
                "completed": r.completed,
                "final_eval_score": r.final_eval_score,
                "final_eval_scores": r.final_eval_scores,
                "bc_loss": r.bc_loss,
                "episodes": len(r.records),
                "wall_ms": r.wall_ms,
            }
            for r in reports
        ],
    }
    if extra:
        payload.update(extra)
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CheckpointError(f"cannot write summary to {path}: {exc}") from exc
