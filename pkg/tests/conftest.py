import numpy as np
import pytest

from pursuitcoach.config import config_from_dict


def tiny_cycle_dict(**overrides):
    """Small, fast cycle config used across orchestrator/session/cli tests."""
    d = {
        "env": {"width": 6, "height": 6, "n_prey": 1, "max_steps": 15,
                "capture_mode": "pincer", "seed": 0, "hazards": [[3, 1]]},
        "hyperparams": {"bc_epochs": 3},
        "oracle": {"skill_epsilon": 0.1, "intervene_lookahead": 1,
                   "reaction_delay": 1, "silence_prob": 0.5, "seed": 0},
        "stages": {
            "demonstration": {"criterion": {"kind": "budget", "limit": 2}, "min_episodes": 1, "cap": 3},
            "intervention": {"criterion": {"kind": "budget", "limit": 2}, "min_episodes": 1, "cap": 3},
            "evaluation": {"criterion": {"kind": "budget", "limit": 2}, "min_episodes": 1, "cap": 3},
            "rl": {"criterion": {"kind": "budget", "limit": 2}, "min_episodes": 1, "cap": 3},
        },
        "networks": {"hidden": [8]},
        "seeds": [1],
        "eval_episodes": 2,
    }
    d.update(overrides)
    return d


@pytest.fixture
def tiny_config():
    return config_from_dict(tiny_cycle_dict())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
