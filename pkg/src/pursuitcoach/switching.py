"""Stage-advance criteria and the advantage computation they share.

A stage advances when its minimum episode count is met and either its
configured criterion fires or the human asked for a manual switch. Criteria:
a trailing-window performance threshold, a data budget, an advantage
comparison between recent human and agent action choices, manual-only, or
any-of composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .env import PerformanceSample
from .errors import ConfigError
from .nets import Params, action_values, policy_probs


@dataclass(frozen=True)
class PerformanceCriterion:
    threshold: float
    window: int = 5


@dataclass(frozen=True)
class BudgetCriterion:
    limit: int
    unit: str = "episodes"  # episodes | demo_pairs | interventions | feedback


@dataclass(frozen=True)
class AdvantageCriterion:
    margin: float = 0.05
    window: int = 64


@dataclass(frozen=True)
class ManualCriterion:
    pass


@dataclass(frozen=True)
class CompositeCriterion:
    any_of: tuple["Criterion", ...]


Criterion = Union[
    PerformanceCriterion, BudgetCriterion, AdvantageCriterion, ManualCriterion, CompositeCriterion
]


@dataclass(frozen=True)
class StageSwitch:
    criterion: Criterion
    min_episodes: int = 5


@dataclass(frozen=True)
class SwitchConfig:
    stages: dict  # stage name -> StageSwitch

    def for_stage(self, stage: str) -> StageSwitch:
        if stage not in self.stages:
            raise ConfigError(f"no switching criterion configured for stage {stage!r}")
        return self.stages[stage]


@dataclass
class SwitchSignals:
    performance_history: list[PerformanceSample] = field(default_factory=list)
    episodes_in_stage: int = 0
    demo_pairs: int = 0
    interventions: int = 0
    feedback_events: int = 0
    recent_human_pairs: list[tuple[np.ndarray, int]] = field(default_factory=list)
    recent_agent_pairs: list[tuple[np.ndarray, int]] = field(default_factory=list)
    manual_flag: bool = False

    def budget_count(self, unit: str) -> int:
        counts = {
            "episodes": self.episodes_in_stage,
            "demo_pairs": self.demo_pairs,
            "interventions": self.interventions,
            "feedback": self.feedback_events,
        }
        if unit not in counts:
            raise ConfigError(f"unknown budget unit {unit!r}")
        return counts[unit]


@dataclass(frozen=True)
class SwitchDecision:
    advance: bool
    reason: str  # criterion that fired, "manual", or "none"


def advantage(critic_params: Params, actor_params: Params, obs: np.ndarray, action: int) -> float:
    """A(s, a) = Q(s, a) - sum_a' pi(a'|s) Q(s, a')."""
    q = action_values(critic_params, obs)
    probs = policy_probs(actor_params, obs)
    return float(q[action] - probs @ q)


def performance_switch(history: Sequence[PerformanceSample], threshold: float, window: int) -> bool:
    if len(history) < window:
        return False
    tail = [s.score for s in history[-window:]]
    return float(np.mean(tail)) >= threshold


def budget_switch(count_consumed: int, limit: int) -> bool:
    return count_consumed >= limit


def advantage_switch(
    critic_params: Params,
    actor_params: Params,
    recent_human_pairs: Sequence[tuple[np.ndarray, int]],
    recent_agent_pairs: Sequence[tuple[np.ndarray, int]],
    margin: float,
) -> bool:
    """True when the agent's recent choices out-advantage the human's by more
    than the margin. Either side empty means insufficient evidence."""
    if not recent_human_pairs or not recent_agent_pairs:
        return False
    mean_h = float(np.mean([advantage(critic_params, actor_params, o, a)
                            for o, a in recent_human_pairs]))
    mean_a = float(np.mean([advantage(critic_params, actor_params, o, a)
                            for o, a in recent_agent_pairs]))
    return mean_a > mean_h + margin


def _criterion_fires(
    criterion: Criterion,
    signals: SwitchSignals,
    critic_params: Optional[Params],
    actor_params: Optional[Params],
) -> tuple[bool, str]:
    if isinstance(criterion, PerformanceCriterion):
        return (
            performance_switch(signals.performance_history, criterion.threshold, criterion.window),
            "performance",
        )
    if isinstance(criterion, BudgetCriterion):
        return budget_switch(signals.budget_count(criterion.unit), criterion.limit), "budget"
    if isinstance(criterion, AdvantageCriterion):
        if critic_params is None or actor_params is None:
            return False, "advantage"
        return (
            advantage_switch(
                critic_params, actor_params,
                signals.recent_human_pairs[-criterion.window:],
                signals.recent_agent_pairs[-criterion.window:],
                criterion.margin,
            ),
            "advantage",
        )
    if isinstance(criterion, ManualCriterion):
        return signals.manual_flag, "manual"
    if isinstance(criterion, CompositeCriterion):
        for sub in criterion.any_of:
            fired, reason = _criterion_fires(sub, signals, critic_params, actor_params)
            if fired:
                return True, reason
        return False, "composite"
    raise ConfigError(f"unknown criterion {criterion!r}")


def evaluate_switch(
    stage: str,
    config: SwitchConfig,
    signals: SwitchSignals,
    critic_params: Optional[Params] = None,
    actor_params: Optional[Params] = None,
) -> SwitchDecision:
    """Advance iff the stage's episode floor is met and (criterion or manual)."""
    stage_switch = config.for_stage(stage)
    if signals.episodes_in_stage < stage_switch.min_episodes:
        return SwitchDecision(advance=False, reason="none")
    if signals.manual_flag:
        return SwitchDecision(advance=True, reason="manual")
    fired, reason = _criterion_fires(stage_switch.criterion, signals, critic_params, actor_params)
    if fired:
        return SwitchDecision(advance=True, reason=reason)
    return SwitchDecision(advance=False, reason="none")
