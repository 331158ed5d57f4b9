"""The four training procedures and the human dataset they share.

Stage order is demonstration -> intervention -> evaluation -> autonomous RL.
Demonstrations fill the human dataset for behavioral cloning and contrastive
reward-model fitting. Intervention episodes aggregate takeover data into the
same dataset, penalize the blocked agent action with a duration-scaled
negative reward, and run critic/actor updates on agent-controlled steps.
Evaluation episodes turn sparse +/-1 feedback into decayed credit over a
short window. The final stage trains on the learned reward model alone.

All procedures are deterministic given their RNG streams and a scripted
human source.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import env as envmod
from .env import EnvConfig, PerformanceSample, StepEvents, episode_score, observe
from .errors import EpisodeAborted, UsageError
from .human import (
    AdvanceStage,
    DemoAction,
    FeedbackEvent,
    HumanSource,
    InterveneStart,
    InterveneStop,
    OverrideAction,
    TickContext,
)
from .nets import (
    Params,
    OptimState,
    action_values,
    apply_update,
    forward,
    init_optim,
    join_obs_action,
    loss_and_grad,
    policy_probs,
)

SOURCE_DEMONSTRATION = "demonstration"
SOURCE_INTERVENTION = "intervention"


@dataclass(frozen=True)
class HyperParams:
    gamma: float = 0.95
    bc_epochs: int = 30
    bc_batch_size: int = 32
    lr_actor: float = 0.01
    lr_critic: float = 0.01
    lr_reward: float = 0.01
    eligibility_decay: float = 0.8
    eligibility_window: int = 8
    intervention_dmax: int = 10
    contrastive_negatives: int = 4
    refit_epochs: int = 1
    intervention_env_reward: bool = False

    def validate(self) -> None:
        from .errors import ConfigError

        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must be in (0, 1)")
        if not 0.0 <= self.eligibility_decay < 1.0:
            raise ConfigError("eligibility_decay must be in [0, 1)")
        if min(self.lr_actor, self.lr_critic, self.lr_reward) <= 0:
            raise ConfigError("learning rates must be positive")
        if min(self.bc_epochs, self.bc_batch_size, self.eligibility_window,
               self.intervention_dmax, self.contrastive_negatives) < 1:
            raise ConfigError("counts must be >= 1")


@dataclass(frozen=True)
class DatasetEntry:
    obs: np.ndarray
    action: int
    source: str
    episode_id: int
    step_index: int


class HumanDataset:
    """Append-only ordered collection of human (observation, action) pairs."""

    def __init__(self, entries: Optional[Sequence[DatasetEntry]] = None):
        self._entries: list[DatasetEntry] = list(entries or [])

    def append(self, entry: DatasetEntry) -> None:
        self._entries.append(entry)

    def extend(self, entries: Sequence[DatasetEntry]) -> None:
        self._entries.extend(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._entries:
            raise UsageError("dataset is empty")
        x = np.stack([e.obs for e in self._entries])
        y = np.array([e.action for e in self._entries], dtype=int)
        return x, y


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    terminal: bool
    controller: str  # "agent" or "human"
    step_index: int
    next_obs: Optional[np.ndarray] = None
    next_probs: Optional[np.ndarray] = None


@dataclass
class InterventionSpan:
    start_step: int
    end_step: int
    trigger_obs: np.ndarray
    trigger_agent_action: int

    @property
    def duration(self) -> int:
        return self.end_step - self.start_step + 1


@dataclass
class Model:
    """A parameter set plus the persistent optimizer that updates it online."""

    params: Params
    optim: OptimState


@dataclass
class EpisodeLog:
    stage: str
    episode_id: int
    events: list[StepEvents] = field(default_factory=list)
    sample: Optional[PerformanceSample] = None
    n_steps: int = 0
    spans: list[InterventionSpan] = field(default_factory=list)
    feedback_count: int = 0
    td_errors: list[float] = field(default_factory=list)
    actor_loss: float = 0.0
    agent_pairs: list[tuple[np.ndarray, int]] = field(default_factory=list)
    human_pairs: list[tuple[np.ndarray, int]] = field(default_factory=list)
    manual_advance: bool = False

    def finish(self, max_steps: int) -> None:
        self.sample = episode_score(self.events, max_steps)


def _episode_config(config: EnvConfig, episode_seed: int) -> EnvConfig:
    return dataclasses.replace(config, seed=episode_seed)


def collect_demonstrations(
    env_config: EnvConfig,
    human_source: HumanSource,
    n_episodes: int,
    episode_seeds: Sequence[int],
    episode_id_start: int = 0,
) -> tuple[list[DatasetEntry], list[EpisodeLog]]:
    """Run full episodes under pure human control; one dataset entry per step."""
    delta: list[DatasetEntry] = []
    logs: list[EpisodeLog] = []
    for i in range(n_episodes):
        episode_id = episode_id_start + i
        log = EpisodeLog(stage="demonstration", episode_id=episode_id)
        entries: list[DatasetEntry] = []
        state = envmod.reset(_episode_config(env_config, episode_seeds[i]))
        human_source.begin_episode("demonstration", episode_id)
        try:
            while not state.terminal:
                obs = observe(state)
                ctx = TickContext(
                    stage="demonstration", episode=episode_id, step=state.step,
                    phase="decide", state=state, obs=obs,
                )
                action = envmod.STAY
                for ev in human_source.poll(ctx):
                    if isinstance(ev, DemoAction):
                        action = ev.action
                    elif isinstance(ev, AdvanceStage):
                        log.manual_advance = True
                entries.append(DatasetEntry(obs, action, SOURCE_DEMONSTRATION,
                                            episode_id, state.step))
                log.human_pairs.append((obs, action))
                state, events = envmod.step(state, action)
                log.events.append(events)
                human_source.poll(TickContext(
                    stage="demonstration", episode=episode_id, step=state.step - 1,
                    phase="outcome", state=state,
                ))
        except EpisodeAborted:
            raise  # partial entries are dropped with the local lists
        log.n_steps = len(entries)
        log.finish(env_config.max_steps)
        human_source.note_episode_end("demonstration", episode_id, log.sample.score)
        delta.extend(entries)
        logs.append(log)
    return delta, logs


def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def train_bc(
    dataset: HumanDataset,
    actor_params: Params,
    hp: HyperParams,
    rng: np.random.Generator,
    epochs: Optional[int] = None,
) -> tuple[Params, float]:
    """Minibatch cross-entropy over the whole dataset; fresh optimizer per call.

    Returns the trained parameters and the mean loss of the final epoch.
    """
    if len(dataset) == 0:
        raise UsageError("cannot clone behavior from an empty dataset")
    n_epochs = hp.bc_epochs if epochs is None else epochs
    if n_epochs == 0:
        return actor_params, 0.0
    x, y = dataset.arrays()
    optim = init_optim(actor_params, hp.lr_actor)
    params = actor_params
    last = 0.0
    for _ in range(n_epochs):
        losses = []
        for idx in _minibatches(len(x), hp.bc_batch_size, rng):
            loss, grad = loss_and_grad(params, (x[idx], y[idx]), "cross_entropy_action")
            params, optim = apply_update(params, grad, optim)
            losses.append(loss)
        last = float(np.mean(losses))
    return params, last


def learn_reward_model(
    entries: Sequence[DatasetEntry],
    reward_params: Params,
    hp: HyperParams,
    rng: np.random.Generator,
    epochs: Optional[int] = None,
    n_actions: int = envmod.N_ACTIONS,
) -> tuple[Params, float]:
    """Contrastive fit: rank each demonstrated action above sampled alternatives."""
    entries = list(entries)
    if not entries:
        raise UsageError("cannot fit a reward model to an empty dataset")
    n_epochs = hp.bc_epochs if epochs is None else epochs
    if n_epochs == 0:
        return reward_params, 0.0
    x = np.stack([join_obs_action(e.obs, e.action, n_actions) for e in entries])
    actions = np.array([e.action for e in entries], dtype=int)
    obs_dim = entries[0].obs.shape[0]
    optim = init_optim(reward_params, hp.lr_reward)
    params = reward_params
    last = 0.0
    for _ in range(n_epochs):
        losses = []
        for idx in _minibatches(len(entries), hp.bc_batch_size, rng):
            reps = np.repeat(idx, hp.contrastive_negatives)
            draw = rng.integers(0, n_actions - 1, size=len(reps))
            negatives = draw + (draw >= actions[reps])
            x_neg = x[reps].copy()
            x_neg[:, obs_dim:] = np.eye(n_actions)[negatives]
            loss, grad = loss_and_grad(params, (x[reps], x_neg), "logistic_pairwise")
            params, optim = apply_update(params, grad, optim)
            losses.append(loss)
        last = float(np.mean(losses))
    return params, last


def intervention_reward(step_index: int, spans: Sequence[InterventionSpan], hp: HyperParams) -> float:
    """Negative, duration-scaled penalty on the step that triggered a takeover."""
    for span in spans:
        if step_index == span.start_step:
            return -min(1.0, span.duration / hp.intervention_dmax)
    return 0.0


def td_update(critic: Model, transition: Transition, reward: float, hp: HyperParams) -> tuple[Model, float]:
    """One expected-SARSA step: target = r + gamma * sum_a pi(a|s') Q(s', a)."""
    if transition.terminal:
        target = reward
    else:
        q_next = action_values(critic.params, transition.next_obs)
        target = reward + hp.gamma * float(transition.next_probs @ q_next)
    n_actions = critic.params.dims[0] - transition.obs.shape[0]
    x = join_obs_action(transition.obs, transition.action, n_actions)
    q_sa = float(forward(critic.params, x)[0])
    td_error = target - q_sa
    _, grad = loss_and_grad(critic.params, (x[None, :], np.array([target])), "mse_scalar")
    params, optim = apply_update(critic.params, grad, critic.optim)
    return Model(params, optim), td_error


def policy_gradient_update(
    actor: Model,
    transitions: Sequence[Transition],
    weights: Sequence[float],
    hp: HyperParams,
) -> tuple[Model, float]:
    """One step on -(1/N) sum w_t log pi(a_t|s_t); weights enter as constants."""
    if not transitions:
        return actor, 0.0
    x = np.stack([t.obs for t in transitions])
    a = np.array([t.action for t in transitions], dtype=int)
    w = np.asarray(weights, dtype=float)
    loss, grad = loss_and_grad(actor.params, (x, a, w), "policy_gradient_weighted_logprob")
    params, optim = apply_update(actor.params, grad, actor.optim)
    return Model(params, optim), loss


def credit_assign(
    feedback: FeedbackEvent,
    recent: Sequence[Transition],
    hp: HyperParams,
) -> list[tuple[Transition, float]]:
    """Decayed credit over the trailing window: the newest transition gets the
    full value, k steps earlier gets value * decay^k."""
    window = list(recent)[-hp.eligibility_window:]
    out = []
    for k, transition in enumerate(reversed(window)):
        out.append((transition, feedback.value * hp.eligibility_decay**k))
    return out


def _advantages(critic: Params, actor: Params, transitions: Sequence[Transition]) -> list[float]:
    from .switching import advantage

    return [advantage(critic, actor, t.obs, t.action) for t in transitions]


def _sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def run_lfi_episode(
    env_config: EnvConfig,
    actor: Model,
    critic: Model,
    reward_model: Model,
    human_source: HumanSource,
    dataset: HumanDataset,
    hp: HyperParams,
    episode_seed: int,
    episode_id: int,
    action_rng: np.random.Generator,
    train_rng: np.random.Generator,
) -> tuple[Model, Model, Model, EpisodeLog]:
    """Shared-control episode: the agent acts until the human takes over.

    Takeover steps feed the aggregated dataset; the blocked agent action at
    each takeover gets the duration-scaled negative reward; agent-controlled
    transitions drive critic TD steps and one advantage-weighted policy
    gradient step at the end.
    """
    log = EpisodeLog(stage="intervention", episode_id=episode_id)
    state = envmod.reset(_episode_config(env_config, episode_seed))
    human_source.begin_episode("intervention", episode_id)
    intervening = False
    open_span: Optional[InterventionSpan] = None
    delta: list[DatasetEntry] = []
    agent_transitions: list[Transition] = []

    while not state.terminal:
        obs = observe(state)
        probs = policy_probs(actor.params, obs)
        proposed = _sample_action(probs, action_rng)
        ctx = TickContext(
            stage="intervention", episode=episode_id, step=state.step,
            phase="decide", state=state, obs=obs, proposed_action=proposed,
        )
        override: Optional[int] = None
        for ev in human_source.poll(ctx):
            if isinstance(ev, InterveneStart) and not intervening:
                intervening = True
                open_span = InterventionSpan(
                    start_step=state.step, end_step=state.step,
                    trigger_obs=obs, trigger_agent_action=proposed,
                )
            elif isinstance(ev, InterveneStop):
                intervening = False
                if open_span is not None:
                    log.spans.append(open_span)
                    open_span = None
            elif isinstance(ev, OverrideAction) and intervening:
                override = ev.action
            elif isinstance(ev, AdvanceStage):
                log.manual_advance = True

        if intervening:
            executed = override if override is not None else envmod.STAY
        else:
            executed = proposed
        step_index = state.step
        new_state, events = envmod.step(state, executed)
        log.events.append(events)
        next_obs = None if new_state.terminal else observe(new_state)
        next_probs = None if new_state.terminal else policy_probs(actor.params, next_obs)

        if intervening:
            if open_span is not None:
                open_span.end_step = step_index
            delta.append(DatasetEntry(obs, executed, SOURCE_INTERVENTION,
                                      episode_id, step_index))
            log.human_pairs.append((obs, executed))
            if open_span is not None and step_index == open_span.start_step:
                # the blocked proposal is the agent decision that gets blamed
                agent_transitions.append(Transition(
                    obs=obs, action=proposed, reward=0.0,
                    terminal=new_state.terminal, controller="agent",
                    step_index=step_index, next_obs=next_obs, next_probs=next_probs,
                ))
        else:
            agent_transitions.append(Transition(
                obs=obs, action=executed, reward=0.0,
                terminal=new_state.terminal, controller="agent",
                step_index=step_index, next_obs=next_obs, next_probs=next_probs,
            ))
            log.agent_pairs.append((obs, executed))

        human_source.poll(TickContext(
            stage="intervention", episode=episode_id, step=step_index,
            phase="outcome", state=new_state, prev_state=state, prev_action=executed,
        ))
        state = new_state

    if open_span is not None:
        log.spans.append(open_span)

    dataset.extend(delta)
    if len(dataset) > 0:
        actor_params, log.actor_loss = train_bc(
            dataset, actor.params, hp, train_rng, epochs=hp.refit_epochs
        )
        actor = Model(actor_params, actor.optim)
    if delta:
        reward_params, _ = learn_reward_model(
            delta, reward_model.params, hp, train_rng, epochs=1
        )
        reward_model = Model(reward_params, reward_model.optim)

    capture_bonus = {}
    if hp.intervention_env_reward:
        for i, ev in enumerate(log.events):
            capture_bonus[i] = float(len(ev.captures))
    for tr in agent_transitions:
        r = intervention_reward(tr.step_index, log.spans, hp)
        r += capture_bonus.get(tr.step_index, 0.0)
        critic, td_error = td_update(critic, tr, r, hp)
        log.td_errors.append(td_error)

    weights = _advantages(critic.params, actor.params, agent_transitions)
    actor, _ = policy_gradient_update(actor, agent_transitions, weights, hp)

    log.n_steps = state.step
    log.finish(env_config.max_steps)
    human_source.note_episode_end("intervention", episode_id, log.sample.score)
    return actor, critic, reward_model, log


def run_lfe_episode(
    env_config: EnvConfig,
    actor: Model,
    critic: Model,
    reward_model: Model,
    human_source: HumanSource,
    hp: HyperParams,
    episode_seed: int,
    episode_id: int,
    action_rng: np.random.Generator,
) -> tuple[Model, Model, Model, EpisodeLog]:
    """Autonomous episode shaped by sparse evaluative feedback.

    Every feedback event is credit-assigned over the trailing window; credited
    rewards drive critic TD steps and a regression of the reward model, and
    each event triggers one advantage-weighted policy gradient step.
    """
    log = EpisodeLog(stage="evaluation", episode_id=episode_id)
    state = envmod.reset(_episode_config(env_config, episode_seed))
    human_source.begin_episode("evaluation", episode_id)
    recent: list[Transition] = []
    pg_losses: list[float] = []

    while not state.terminal:
        obs = observe(state)
        probs = policy_probs(actor.params, obs)
        action = _sample_action(probs, action_rng)
        for ev in human_source.poll(TickContext(
            stage="evaluation", episode=episode_id, step=state.step,
            phase="decide", state=state, obs=obs, proposed_action=action,
        )):
            if isinstance(ev, AdvanceStage):
                log.manual_advance = True

        step_index = state.step
        new_state, events = envmod.step(state, action)
        log.events.append(events)
        next_obs = None if new_state.terminal else observe(new_state)
        next_probs = None if new_state.terminal else policy_probs(actor.params, next_obs)
        recent.append(Transition(
            obs=obs, action=action, reward=0.0, terminal=new_state.terminal,
            controller="agent", step_index=step_index,
            next_obs=next_obs, next_probs=next_probs,
        ))
        log.agent_pairs.append((obs, action))
        recent = recent[-hp.eligibility_window:]

        for ev in human_source.poll(TickContext(
            stage="evaluation", episode=episode_id, step=step_index,
            phase="outcome", state=new_state, prev_state=state, prev_action=action,
        )):
            if isinstance(ev, AdvanceStage):
                log.manual_advance = True
                continue
            if not isinstance(ev, FeedbackEvent):
                continue
            log.feedback_count += 1
            credited = credit_assign(ev, recent, hp)
            for tr, r in credited:
                critic, td_error = td_update(critic, tr, r, hp)
                log.td_errors.append(td_error)
            x = np.stack([join_obs_action(tr.obs, tr.action) for tr, _ in credited])
            targets = np.array([r for _, r in credited])
            _, grad = loss_and_grad(reward_model.params, (x, targets), "mse_scalar")
            rp, ro = apply_update(reward_model.params, grad, reward_model.optim)
            reward_model = Model(rp, ro)
            credited_tr = [tr for tr, _ in credited]
            weights = _advantages(critic.params, actor.params, credited_tr)
            actor, pg_loss = policy_gradient_update(actor, credited_tr, weights, hp)
            pg_losses.append(pg_loss)
        state = new_state

    log.actor_loss = float(np.mean(pg_losses)) if pg_losses else 0.0
    log.n_steps = state.step
    log.finish(env_config.max_steps)
    human_source.note_episode_end("evaluation", episode_id, log.sample.score)
    return actor, critic, reward_model, log


def run_rl_episode(
    env_config: EnvConfig,
    actor: Model,
    critic: Model,
    reward_model: Model,
    hp: HyperParams,
    episode_seed: int,
    episode_id: int,
    action_rng: np.random.Generator,
    human_source: Optional[HumanSource] = None,
) -> tuple[Model, Model, EpisodeLog]:
    """Pure RL on the learned reward model: TD per step, one advantage-weighted
    policy gradient step per episode. The optional source only paces live
    sessions and carries manual stage switches; it contributes no rewards."""
    log = EpisodeLog(stage="rl", episode_id=episode_id)
    state = envmod.reset(_episode_config(env_config, episode_seed))
    if human_source is not None:
        human_source.begin_episode("rl", episode_id)
    transitions: list[Transition] = []

    while not state.terminal:
        obs = observe(state)
        probs = policy_probs(actor.params, obs)
        action = _sample_action(probs, action_rng)
        if human_source is not None:
            for ev in human_source.poll(TickContext(
                stage="rl", episode=episode_id, step=state.step,
                phase="decide", state=state, obs=obs, proposed_action=action,
            )):
                if isinstance(ev, AdvanceStage):
                    log.manual_advance = True

        reward = float(forward(reward_model.params, join_obs_action(obs, action))[0])
        step_index = state.step
        new_state, events = envmod.step(state, action)
        log.events.append(events)
        next_obs = None if new_state.terminal else observe(new_state)
        next_probs = None if new_state.terminal else policy_probs(actor.params, next_obs)
        tr = Transition(
            obs=obs, action=action, reward=reward, terminal=new_state.terminal,
            controller="agent", step_index=step_index,
            next_obs=next_obs, next_probs=next_probs,
        )
        transitions.append(tr)
        log.agent_pairs.append((obs, action))
        critic, td_error = td_update(critic, tr, reward, hp)
        log.td_errors.append(td_error)

        if human_source is not None:
            for ev in human_source.poll(TickContext(
                stage="rl", episode=episode_id, step=step_index,
                phase="outcome", state=new_state, prev_state=state, prev_action=action,
            )):
                if isinstance(ev, AdvanceStage):
                    log.manual_advance = True
        state = new_state

    weights = _advantages(critic.params, actor.params, transitions)
    actor, log.actor_loss = policy_gradient_update(actor, transitions, weights, hp)

    log.n_steps = state.step
    log.finish(env_config.max_steps)
    if human_source is not None:
        human_source.note_episode_end("rl", episode_id, log.sample.score)
    return actor, critic, log
