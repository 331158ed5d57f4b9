"""Contract between stage drivers and whoever plays the human.

A stage driver polls its human source once per environment tick, twice per
step: a "decide" poll before the step (demo actions, interventions, manual
switching) and an "outcome" poll after it (evaluative feedback). Events that
arrive between ticks apply at the next poll. The scripted oracle and the live
session source both implement this interface, so every stage procedure runs
identically headless or online.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .env import EnvState


@dataclass(frozen=True)
class DemoAction:
    action: int


@dataclass(frozen=True)
class InterveneStart:
    pass


@dataclass(frozen=True)
class InterveneStop:
    pass


@dataclass(frozen=True)
class OverrideAction:
    action: int


@dataclass(frozen=True)
class FeedbackEvent:
    value: int  # -1 or +1
    issued_at_step: int


@dataclass(frozen=True)
class AdvanceStage:
    pass


HumanEvent = Union[DemoAction, InterveneStart, InterveneStop, OverrideAction, FeedbackEvent, AdvanceStage]


@dataclass
class TickContext:
    stage: str
    episode: int
    step: int
    phase: str  # "decide" before the env step, "outcome" after it
    state: EnvState
    obs: Optional[np.ndarray] = None
    proposed_action: Optional[int] = None
    prev_state: Optional[EnvState] = None
    prev_action: Optional[int] = None
    info: dict = field(default_factory=dict)


class HumanSource:
    """Base interface; implementations override poll and, if they carry
    state that must survive a checkpoint, export_state/import_state."""

    def begin_episode(self, stage: str, episode: int) -> None:
        pass

    def poll(self, ctx: TickContext) -> list[HumanEvent]:
        raise NotImplementedError

    def note_episode_end(self, stage: str, episode: int, score: float) -> None:
        pass

    def export_state(self) -> dict:
        return {}

    def import_state(self, state: dict) -> None:
        pass
