"""Experiment configuration: schema, YAML loading, and fingerprinting.

One YAML document configures a whole run; see configs/default.yaml and the
README for the field-by-field schema. The fingerprint is a sha256 over the
canonical JSON form (output_dir excluded) and guards checkpoints and session
replays against config drift.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import yaml

from .env import EnvConfig
from .errors import ConfigError
from .oracle import OracleConfig
from .stages import HyperParams
from .switching import (
    AdvantageCriterion,
    BudgetCriterion,
    CompositeCriterion,
    Criterion,
    ManualCriterion,
    PerformanceCriterion,
    StageSwitch,
    SwitchConfig,
)

STAGE_ORDER = ("demonstration", "intervention", "evaluation", "rl")


@dataclass(frozen=True)
class StagePlan:
    switch: StageSwitch
    cap: int = 50  # forced advance after this many episodes


@dataclass(frozen=True)
class CycleConfig:
    env: EnvConfig
    hp: HyperParams = HyperParams()
    stages: dict = field(default_factory=dict)  # stage name -> StagePlan
    oracle: OracleConfig = OracleConfig()
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"
    hidden_sizes: tuple[int, ...] = (32,)
    eval_episodes: int = 10

    def validate(self) -> None:
        self.env.validate()
        self.hp.validate()
        self.oracle.validate()
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        for stage in STAGE_ORDER:
            if stage not in self.stages:
                raise ConfigError(f"missing stage plan for {stage!r}")
            plan = self.stages[stage]
            if plan.cap < plan.switch.min_episodes:
                raise ConfigError(f"stage {stage!r} cap below its episode floor")

    def switch_config(self) -> SwitchConfig:
        return SwitchConfig(stages={name: plan.switch for name, plan in self.stages.items()})


def _criterion_to_dict(c: Criterion) -> dict:
    if isinstance(c, PerformanceCriterion):
        return {"kind": "performance", "threshold": c.threshold, "window": c.window}
    if isinstance(c, BudgetCriterion):
        return {"kind": "budget", "limit": c.limit, "unit": c.unit}
    if isinstance(c, AdvantageCriterion):
        return {"kind": "advantage", "margin": c.margin, "window": c.window}
    if isinstance(c, ManualCriterion):
        return {"kind": "manual"}
    if isinstance(c, CompositeCriterion):
        return {"kind": "composite", "any_of": [_criterion_to_dict(s) for s in c.any_of]}
    raise ConfigError(f"unknown criterion {c!r}")


def _criterion_from_dict(d: dict) -> Criterion:
    kind = d.get("kind")
    if kind == "performance":
        return PerformanceCriterion(threshold=float(d["threshold"]), window=int(d.get("window", 5)))
    if kind == "budget":
        return BudgetCriterion(limit=int(d["limit"]), unit=str(d.get("unit", "episodes")))
    if kind == "advantage":
        return AdvantageCriterion(margin=float(d.get("margin", 0.05)), window=int(d.get("window", 64)))
    if kind == "manual":
        return ManualCriterion()
    if kind == "composite":
        return CompositeCriterion(any_of=tuple(_criterion_from_dict(s) for s in d["any_of"]))
    raise ConfigError(f"unknown criterion kind {kind!r}")


def config_to_dict(config: CycleConfig) -> dict:
    return {
        "env": {
            "width": config.env.width,
            "height": config.env.height,
            "n_prey": config.env.n_prey,
            "hazards": [list(c) for c in config.env.hazard_cells],
            "max_steps": config.env.max_steps,
            "capture_mode": config.env.capture_mode,
            "seed": config.env.seed,
        },
        "hyperparams": {
            "gamma": config.hp.gamma,
            "bc_epochs": config.hp.bc_epochs,
            "bc_batch_size": config.hp.bc_batch_size,
            "lr_actor": config.hp.lr_actor,
            "lr_critic": config.hp.lr_critic,
            "lr_reward": config.hp.lr_reward,
            "eligibility_decay": config.hp.eligibility_decay,
            "eligibility_window": config.hp.eligibility_window,
            "intervention_dmax": config.hp.intervention_dmax,
            "contrastive_negatives": config.hp.contrastive_negatives,
            "refit_epochs": config.hp.refit_epochs,
            "intervention_env_reward": config.hp.intervention_env_reward,
        },
        "oracle": {
            "skill_epsilon": config.oracle.skill_epsilon,
            "intervene_lookahead": config.oracle.intervene_lookahead,
            "silence_prob": config.oracle.silence_prob,
            "reaction_delay": config.oracle.reaction_delay,
            "seed": config.oracle.seed,
        },
        "stages": {
            name: {
                "criterion": _criterion_to_dict(plan.switch.criterion),
                "min_episodes": plan.switch.min_episodes,
                "cap": plan.cap,
            }
            for name, plan in config.stages.items()
        },
        "networks": {"hidden": list(config.hidden_sizes)},
        "seeds": list(config.seeds),
        "eval_episodes": config.eval_episodes,
        "output_dir": config.output_dir,
    }


def config_from_dict(d: dict) -> CycleConfig:
    try:
        env_d = d.get("env", {})
        env = EnvConfig(
            width=int(env_d.get("width", 10)),
            height=int(env_d.get("height", 10)),
            n_prey=int(env_d.get("n_prey", 2)),
            hazard_cells=tuple(tuple(c) for c in env_d.get("hazards", [])),
            max_steps=int(env_d.get("max_steps", 60)),
            capture_mode=str(env_d.get("capture_mode", "pincer")),
            seed=int(env_d.get("seed", 0)),
        )
        hp_d = d.get("hyperparams", {})
        hp = HyperParams(**{k: hp_d[k] for k in hp_d})
        oracle_d = d.get("oracle", {})
        oracle = OracleConfig(**{k: oracle_d[k] for k in oracle_d})
        stages = {}
        for name, plan_d in d.get("stages", {}).items():
            if name not in STAGE_ORDER:
                raise ConfigError(f"unknown stage {name!r}")
            stages[name] = StagePlan(
                switch=StageSwitch(
                    criterion=_criterion_from_dict(plan_d["criterion"]),
                    min_episodes=int(plan_d.get("min_episodes", 5)),
                ),
                cap=int(plan_d.get("cap", 50)),
            )
        config = CycleConfig(
            env=env,
            hp=hp,
            stages=stages,
            oracle=oracle,
            seeds=tuple(int(s) for s in d.get("seeds", [0])),
            output_dir=str(d.get("output_dir", "out")),
            hidden_sizes=tuple(int(h) for h in d.get("networks", {}).get("hidden", [32])),
            eval_episodes=int(d.get("eval_episodes", 10)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    config.validate()
    return config


def load_config(path: str) -> CycleConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    return config_from_dict(raw)


def config_fingerprint(config: CycleConfig) -> str:
    d = config_to_dict(config)
    d.pop("output_dir", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
