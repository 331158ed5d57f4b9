import numpy as np
import pytest

from pursuitcoach import switching as SW
from pursuitcoach.env import PerformanceSample
from pursuitcoach.errors import ConfigError
from pursuitcoach.nets import Params, init_params


def sample(score):
    return PerformanceSample(captures=0, steps_to_first_capture=10, hazard_hit=False, score=score)


def scalar_head(values, obs_dim=1):
    """Critic whose Q(s, a) equals values[a] whenever the obs part is zero."""
    n = len(values)
    w = np.zeros((1, obs_dim + n))
    w[0, obs_dim:] = values
    return Params((obs_dim + n, 1), (w,), (np.zeros(1),))


def logit_head(logits, obs_dim=1):
    n = len(logits)
    return Params((obs_dim, n), (np.zeros((n, obs_dim)),), (np.array(logits, dtype=float),))


# -- advantage ----------------------------------------------------------------

def test_advantage_zero_when_q_constant():
    critic = scalar_head([2.5] * 5)
    actor = logit_head([0.3, -1.0, 0.0, 2.0, 0.5])
    obs = np.zeros(1)
    for a in range(5):
        assert SW.advantage(critic, actor, obs, a) == pytest.approx(0.0, abs=1e-12)


def test_advantage_expectation_identity():
    rng = np.random.default_rng(0)
    for _ in range(500):
        critic = init_params((6, 5, 1), int(rng.integers(1e9)))
        actor = init_params((1, 4, 5), int(rng.integers(1e9)))
        obs = rng.normal(0, 1, 1)
        from pursuitcoach.nets import policy_probs

        probs = policy_probs(actor, obs)
        advs = np.array([SW.advantage(critic, actor, obs, a) for a in range(5)])
        assert abs(float(probs @ advs)) < 1e-10


def test_advantage_hand_computed():
    q = np.array([1.0, -2.0, 0.5, 3.0, 0.0])
    logits = np.array([0.0, 1.0, -1.0, 0.5, 2.0])
    critic = scalar_head(q)
    actor = logit_head(logits)
    probs = np.exp(logits) / np.exp(logits).sum()
    expected = q - probs @ q
    obs = np.zeros(1)
    for a in range(5):
        assert SW.advantage(critic, actor, obs, a) == pytest.approx(expected[a], abs=1e-12)


# -- predicates ---------------------------------------------------------------

def test_performance_switch_cases():
    assert not SW.performance_switch([], 1.0, 3)
    hist = [sample(1.0), sample(1.2), sample(1.1)]
    assert SW.performance_switch(hist, 1.0, 3)
    assert not SW.performance_switch(hist, 1.2, 3)
    # only the trailing window counts
    hist = [sample(-10.0)] + hist
    assert SW.performance_switch(hist, 1.0, 3)


def test_budget_switch_cases():
    assert not SW.budget_switch(0, 10)
    assert SW.budget_switch(10, 10)
    assert SW.budget_switch(0, 0)


def test_advantage_switch_cases():
    q = np.array([5.0, 0.0, 0.0, 0.0, -5.0])
    critic = scalar_head(q)
    actor = logit_head([0.0] * 5)
    obs = np.zeros(1)
    best = [(obs, 0)] * 4
    worst = [(obs, 4)] * 4
    assert SW.advantage_switch(critic, actor, worst, best, margin=0.0)
    assert not SW.advantage_switch(critic, actor, best, worst, margin=0.0)
    # equality is not surpassing
    assert not SW.advantage_switch(critic, actor, best, best, margin=0.0)
    assert not SW.advantage_switch(critic, actor, [], best, margin=0.0)
    assert not SW.advantage_switch(critic, actor, worst, [], margin=0.0)


def test_advantage_invariant_under_q_shift():
    rng = np.random.default_rng(4)
    for _ in range(200):
        critic = init_params((6, 4, 1), int(rng.integers(1e9)))
        actor = init_params((1, 4, 5), int(rng.integers(1e9)))
        obs = rng.normal(0, 1, 1)
        c = float(rng.normal(0, 3))
        shifted = Params(
            critic.dims, critic.weights, critic.biases[:-1] + (critic.biases[-1] + c,)
        )
        for a in range(5):
            assert SW.advantage(critic, actor, obs, a) == pytest.approx(
                SW.advantage(shifted, actor, obs, a), abs=1e-9
            )


# -- evaluate_switch ----------------------------------------------------------

def cfg_with(criterion, min_episodes=1):
    return SW.SwitchConfig(
        stages={"demonstration": SW.StageSwitch(criterion=criterion, min_episodes=min_episodes)}
    )


def test_manual_flag_overrides_criterion():
    config = cfg_with(SW.PerformanceCriterion(threshold=99.0, window=3))
    signals = SW.SwitchSignals(episodes_in_stage=5, manual_flag=True)
    decision = SW.evaluate_switch("demonstration", config, signals)
    assert decision.advance and decision.reason == "manual"


def test_floor_blocks_even_true_criterion():
    config = cfg_with(SW.BudgetCriterion(limit=0), min_episodes=5)
    signals = SW.SwitchSignals(episodes_in_stage=4, manual_flag=True)
    assert not SW.evaluate_switch("demonstration", config, signals).advance


def test_composite_any_of():
    config = cfg_with(SW.CompositeCriterion(any_of=(
        SW.BudgetCriterion(limit=5),
        SW.PerformanceCriterion(threshold=1.0, window=3),
    )))
    signals = SW.SwitchSignals(episodes_in_stage=5)
    decision = SW.evaluate_switch("demonstration", config, signals)
    assert decision.advance and decision.reason == "budget"

    signals = SW.SwitchSignals(episodes_in_stage=2)
    assert not SW.evaluate_switch("demonstration", config, signals).advance


def test_unconfigured_stage_rejected():
    config = cfg_with(SW.ManualCriterion())
    with pytest.raises(ConfigError):
        SW.evaluate_switch("rl", config, SW.SwitchSignals())


def test_budget_units():
    signals = SW.SwitchSignals(
        episodes_in_stage=1, demo_pairs=40, interventions=3, feedback_events=7
    )
    assert signals.budget_count("demo_pairs") == 40
    assert signals.budget_count("interventions") == 3
    assert signals.budget_count("feedback") == 7
    with pytest.raises(ConfigError):
        signals.budget_count("squirrels")


def test_evaluate_switch_pure():
    config = cfg_with(SW.BudgetCriterion(limit=3))
    signals = SW.SwitchSignals(episodes_in_stage=3)
    a = SW.evaluate_switch("demonstration", config, signals)
    b = SW.evaluate_switch("demonstration", config, signals)
    assert a == b


def test_monotone_predicates():
    assert all(SW.budget_switch(n, 4) for n in range(4, 20))
    hist = [sample(2.0)] * 3
    assert SW.performance_switch(hist, 1.5, 3)
    assert SW.performance_switch(hist + [sample(2.5)], 1.5, 3)
