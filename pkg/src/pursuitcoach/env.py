"""Deterministic predator-prey pursuit gridworld.

Three predators chase scripted fleeing prey on a bounded grid. Predator 0 is
the learner; predators 1 and 2 are scripted teammates that greedily close on
their nearest alive prey. Hazard cells are catastrophic for the learner only:
stepping onto one ends the episode. All dynamics are pure functions of
(state, action); the only randomness is the spawn draw in reset().

Coordinates are (x, y) with x in [0, width), y in [0, height), y growing
downward. Action indices are fixed: 0=Up (y-1), 1=Down (y+1), 2=Left (x-1),
3=Right (x+1), 4=Stay. Moving into a wall clamps to Stay.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, UsageError

UP, DOWN, LEFT, RIGHT, STAY = 0, 1, 2, 3, 4
N_ACTIONS = 5
ACTION_DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0), (0, 0))
ACTION_NAMES = ("up", "down", "left", "right", "stay")

N_PREDATORS = 3
OBS_PREY_SLOTS = 2
OBS_SIZE = 15  # 2 pos + 2*2 teammates + 3*2 prey slots + 2 hazard + 1 time

Cell = tuple[int, int]


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class EnvConfig:
    width: int = 10
    height: int = 10
    n_prey: int = 2
    hazard_cells: tuple[Cell, ...] = ()
    max_steps: int = 60
    capture_mode: str = "pincer"  # or "solo"
    seed: int = 0

    def __post_init__(self):
        # canonicalize hazards so iteration order never depends on input order
        cells = tuple(sorted((int(x), int(y)) for x, y in self.hazard_cells))
        object.__setattr__(self, "hazard_cells", cells)

    def validate(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ConfigError(f"grid must be at least 4x4, got {self.width}x{self.height}")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.n_prey < 1:
            raise ConfigError("n_prey must be >= 1")
        if self.capture_mode not in ("pincer", "solo"):
            raise ConfigError(f"unknown capture_mode {self.capture_mode!r}")
        for cell in self.hazard_cells:
            if not self._in_grid(cell):
                raise ConfigError(f"hazard {cell} outside the {self.width}x{self.height} grid")
        if len(self._predator_spawn_cells()) < N_PREDATORS:
            raise ConfigError("hazards leave fewer than 3 spawn cells in the left column")
        if len(self._prey_spawn_cells()) < self.n_prey:
            raise ConfigError("hazards leave too few spawn cells in the right half")

    def _in_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def _predator_spawn_cells(self) -> list[Cell]:
        hazards = set(self.hazard_cells)
        return [(0, y) for y in range(self.height) if (0, y) not in hazards]

    def _prey_spawn_cells(self) -> list[Cell]:
        hazards = set(self.hazard_cells)
        x0 = (self.width + 1) // 2
        return [
            (x, y)
            for x in range(x0, self.width)
            for y in range(self.height)
            if (x, y) not in hazards
        ]


@dataclass(frozen=True)
class PreyState:
    pos: Cell
    alive: bool = True


@dataclass(frozen=True)
class EnvState:
    config: EnvConfig
    predators: tuple[Cell, Cell, Cell]
    prey: tuple[PreyState, ...]
    step: int = 0
    terminal: bool = False
    capture_events: tuple[tuple[int, int], ...] = ()  # (step, prey_index)
    rng_state: dict | None = None

    @property
    def learner(self) -> Cell:
        return self.predators[0]

    def alive_prey(self) -> list[tuple[int, Cell]]:
        return [(i, p.pos) for i, p in enumerate(self.prey) if p.alive]


@dataclass(frozen=True)
class StepEvents:
    captures: tuple[int, ...] = ()  # prey indices captured this step
    hazard: bool = False
    timeout: bool = False


@dataclass(frozen=True)
class PerformanceSample:
    captures: int
    steps_to_first_capture: int
    hazard_hit: bool
    score: float


def clamp_move(pos: Cell, action: int, width: int, height: int) -> Cell:
    dx, dy = ACTION_DELTAS[action]
    return (
        min(max(pos[0] + dx, 0), width - 1),
        min(max(pos[1] + dy, 0), height - 1),
    )


def reset(config: EnvConfig) -> EnvState:
    """Spawn predators in the left column and prey in the right half.

    The draw is a pure function of config.seed; hazard cells are never chosen.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)

    pred_cells = config._predator_spawn_cells()
    picks = rng.choice(len(pred_cells), size=N_PREDATORS, replace=False)
    predators = tuple(pred_cells[int(i)] for i in picks)

    prey_cells = config._prey_spawn_cells()
    picks = rng.choice(len(prey_cells), size=config.n_prey, replace=False)
    prey = tuple(PreyState(prey_cells[int(i)]) for i in picks)

    return EnvState(
        config=config,
        predators=predators,  # type: ignore[arg-type]
        prey=prey,
        rng_state=rng.bit_generator.state,
    )


def _chase_action(pos: Cell, prey: Sequence[PreyState], cfg: EnvConfig) -> int:
    alive = [(manhattan(pos, p.pos), i, p.pos) for i, p in enumerate(prey) if p.alive]
    if not alive:
        return STAY
    _, _, target = min(alive)
    best = STAY
    best_dist = None
    for action in range(N_ACTIONS):
        cell = clamp_move(pos, action, cfg.width, cfg.height)
        d = manhattan(cell, target)
        if best_dist is None or d < best_dist:
            best, best_dist = action, d
    return best


def _flee_action(pos: Cell, predators: Sequence[Cell], cfg: EnvConfig) -> int:
    best = STAY
    best_dist = None
    for action in range(N_ACTIONS):
        cell = clamp_move(pos, action, cfg.width, cfg.height)
        d = min(manhattan(cell, p) for p in predators)
        if best_dist is None or d > best_dist:
            best, best_dist = action, d
    return best


def _is_captured(pos: Cell, predators: Sequence[Cell], mode: str) -> bool:
    if mode == "solo":
        return any(p == pos for p in predators)
    return sum(1 for p in predators if chebyshev(p, pos) <= 1) >= 2


def step(state: EnvState, learner_action: int) -> tuple[EnvState, StepEvents]:
    """Advance one tick: learner, teammates, prey move in that order, then
    captures and the learner hazard check resolve."""
    if state.terminal:
        raise UsageError("step() called on a terminal state")
    if not 0 <= learner_action < N_ACTIONS:
        raise UsageError(f"action index {learner_action} out of range")
    cfg = state.config

    learner = clamp_move(state.predators[0], learner_action, cfg.width, cfg.height)
    teammates = []
    for mate in state.predators[1:]:
        action = _chase_action(mate, state.prey, cfg)
        teammates.append(clamp_move(mate, action, cfg.width, cfg.height))
    predators = (learner, *teammates)

    moved_prey = []
    for p in state.prey:
        if not p.alive:
            moved_prey.append(p)
            continue
        action = _flee_action(p.pos, predators, cfg)
        moved_prey.append(PreyState(clamp_move(p.pos, action, cfg.width, cfg.height)))

    captures = []
    final_prey = []
    for i, p in enumerate(moved_prey):
        if p.alive and _is_captured(p.pos, predators, cfg.capture_mode):
            final_prey.append(PreyState(p.pos, alive=False))
            captures.append(i)
        else:
            final_prey.append(p)

    hazard = learner in set(cfg.hazard_cells)
    new_step = state.step + 1
    all_dead = all(not p.alive for p in final_prey)
    timeout = new_step >= cfg.max_steps and not hazard and not all_dead
    terminal = hazard or all_dead or new_step >= cfg.max_steps

    events = StepEvents(captures=tuple(captures), hazard=hazard, timeout=timeout)
    new_state = EnvState(
        config=cfg,
        predators=predators,  # type: ignore[arg-type]
        prey=tuple(final_prey),
        step=new_step,
        terminal=terminal,
        capture_events=state.capture_events
        + tuple((state.step, i) for i in captures),
        rng_state=state.rng_state,
    )
    return new_state, events


def observe(state: EnvState) -> np.ndarray:
    """Egocentric 15-value feature vector; see the module docstring layout.

    Offsets are normalized by (width-1, height-1) so they stay in [-1, 1];
    dead or absent prey slots and a hazard-free grid encode as zeros.
    """
    cfg = state.config
    wn = cfg.width - 1
    hn = cfg.height - 1
    lx, ly = state.predators[0]
    out = np.zeros(OBS_SIZE)
    out[0] = lx / wn
    out[1] = ly / hn

    for i, (mx, my) in enumerate(state.predators[1:]):
        out[2 + 2 * i] = (mx - lx) / wn
        out[3 + 2 * i] = (my - ly) / hn

    alive = sorted(
        ((manhattan((lx, ly), p.pos), i, p.pos) for i, p in enumerate(state.prey) if p.alive)
    )
    for slot in range(OBS_PREY_SLOTS):
        if slot < len(alive):
            _, _, (px, py) = alive[slot]
            out[6 + 3 * slot] = (px - lx) / wn
            out[7 + 3 * slot] = (py - ly) / hn
            out[8 + 3 * slot] = 1.0

    if cfg.hazard_cells:
        _, hx, hy = min(
            (manhattan((lx, ly), c), c[0], c[1]) for c in cfg.hazard_cells
        )
        out[12] = (hx - lx) / wn
        out[13] = (hy - ly) / hn

    out[14] = (cfg.max_steps - state.step) / cfg.max_steps
    return out


def episode_score(events: Iterable[StepEvents], max_steps: int) -> PerformanceSample:
    """Collapse one episode's step events into the scalar performance metric.

    score = captures - 1[hazard] + 0.5 * (1 - first_capture_step/max_steps),
    with the bonus term only when at least one capture happened.
    """
    captures = 0
    first = max_steps
    hazard = False
    for i, ev in enumerate(events):
        if ev.captures and captures == 0:
            first = i
        captures += len(ev.captures)
        hazard = hazard or ev.hazard
    score = float(captures) - (1.0 if hazard else 0.0)
    if captures > 0:
        score += 0.5 * (1.0 - first / max_steps)
    return PerformanceSample(
        captures=captures,
        steps_to_first_capture=first,
        hazard_hit=hazard,
        score=score,
    )
