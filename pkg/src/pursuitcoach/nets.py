"""Small feed-forward approximators with analytic gradients.

Three role-distinct instances drive training: the actor maps a 15-value
observation to 5 action logits; the critic and the reward model map
observation + one-hot action to a scalar. Hidden layers are tanh, the output
layer is identity. Backprop is written out by hand so every gradient can be
checked against finite differences, and updates use Adam with bias
correction. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalError, UsageError

LOSS_KINDS = (
    "cross_entropy_action",
    "mse_scalar",
    "logistic_pairwise",
    "policy_gradient_weighted_logprob",
)


@dataclass(frozen=True)
class Params:
    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # weights[l] has shape (dims[l+1], dims[l])
    biases: tuple[np.ndarray, ...]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Grads:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class OptimState:
    """Adam accumulators; shapes mirror the parameter set they update."""

    learning_rate: float
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m_weights: tuple[np.ndarray, ...] = ()
    m_biases: tuple[np.ndarray, ...] = ()
    v_weights: tuple[np.ndarray, ...] = ()
    v_biases: tuple[np.ndarray, ...] = ()


def init_optim(params: Params, learning_rate: float) -> OptimState:
    if learning_rate <= 0:
        raise ConfigError("learning_rate must be positive")
    zeros_w = tuple(np.zeros_like(w) for w in params.weights)
    zeros_b = tuple(np.zeros_like(b) for b in params.biases)
    return OptimState(
        learning_rate=learning_rate,
        m_weights=zeros_w,
        m_biases=zeros_b,
        v_weights=tuple(np.zeros_like(w) for w in params.weights),
        v_biases=tuple(np.zeros_like(b) for b in params.biases),
    )


def init_params(layer_dims: tuple[int, ...], seed: int) -> Params:
    """Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +], zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ConfigError(f"layer dims must be >= 2 positive entries, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Params(dims=dims, weights=tuple(weights), biases=tuple(biases))


def _forward_cached(params: Params, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer; acts[0] is the input, acts[-1] the output."""
    acts = [x]
    a = x
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if l == last else np.tanh(z)
        acts.append(a)
    return acts


def forward(params: Params, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.dims[0]:
        raise UsageError(
            f"input length {x.shape[1]} does not match network input {params.dims[0]}"
        )
    out = _forward_cached(params, x)[-1]
    return out[0] if single else out


def _backward(params: Params, acts: list[np.ndarray], dout: np.ndarray) -> Grads:
    dw = [None] * params.n_layers
    db = [None] * params.n_layers
    delta = dout
    for l in range(params.n_layers - 1, -1, -1):
        dw[l] = delta.T @ acts[l]
        db[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l]) * (1.0 - acts[l] ** 2)
    return Grads(weights=tuple(dw), biases=tuple(db))


def _add_grads(a: Grads, b: Grads) -> Grads:
    return Grads(
        weights=tuple(x + y for x, y in zip(a.weights, b.weights)),
        biases=tuple(x + y for x, y in zip(a.biases, b.biases)),
    )


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def policy_probs(actor_params: Params, obs) -> np.ndarray:
    logits = forward(actor_params, obs)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("non-finite action logits")
    return np.exp(_log_softmax(logits[None, :]))[0]


def join_obs_action(obs: np.ndarray, action: int, n_actions: int = 5) -> np.ndarray:
    one_hot = np.zeros(n_actions)
    one_hot[action] = 1.0
    return np.concatenate([np.asarray(obs, dtype=float), one_hot])


def action_values(params: Params, obs: np.ndarray) -> np.ndarray:
    """Scalar head evaluated for each action one-hot appended to obs."""
    obs = np.asarray(obs, dtype=float)
    n_actions = params.dims[0] - obs.shape[0]
    if n_actions < 1:
        raise UsageError("network input smaller than the observation")
    x = np.tile(obs, (n_actions, 1))
    x = np.concatenate([x, np.eye(n_actions)], axis=1)
    return forward(params, x)[:, 0]


def loss_and_grad(params: Params, batch, loss_kind: str) -> tuple[float, Grads]:
    """Mean batch loss and its exact analytic gradient.

    Batch layouts per kind:
      cross_entropy_action: (inputs, action_indices)
      mse_scalar: (inputs, targets)
      logistic_pairwise: (preferred_inputs, rejected_inputs)
      policy_gradient_weighted_logprob: (inputs, action_indices, weights)
    """
    if loss_kind not in LOSS_KINDS:
        raise UsageError(f"unknown loss kind {loss_kind!r}")
    arrays = [np.asarray(a, dtype=float) for a in batch]
    if len(arrays) == 0 or arrays[0].shape[0] == 0:
        raise UsageError("empty batch")
    n = arrays[0].shape[0]

    if loss_kind == "cross_entropy_action":
        x, actions = arrays
        actions = actions.astype(int)
        acts = _forward_cached(params, x)
        logp = _log_softmax(acts[-1])
        loss = -logp[np.arange(n), actions].mean()
        dout = np.exp(logp)
        dout[np.arange(n), actions] -= 1.0
        dout /= n
        return float(loss), _backward(params, acts, dout)

    if loss_kind == "mse_scalar":
        x, targets = arrays
        acts = _forward_cached(params, x)
        pred = acts[-1][:, 0]
        err = pred - targets
        loss = float(np.mean(err**2))
        dout = np.zeros_like(acts[-1])
        dout[:, 0] = 2.0 * err / n
        return loss, _backward(params, acts, dout)

    if loss_kind == "logistic_pairwise":
        x_pos, x_neg = arrays
        acts_pos = _forward_cached(params, x_pos)
        acts_neg = _forward_cached(params, x_neg)
        margin = acts_pos[-1][:, 0] - acts_neg[-1][:, 0]
        # -log sigmoid(margin) = softplus(-margin), computed stably
        loss = float(np.mean(np.logaddexp(0.0, -margin)))
        dmargin = -1.0 / (1.0 + np.exp(margin)) / n  # -sigmoid(-margin)/n
        dpos = np.zeros_like(acts_pos[-1])
        dpos[:, 0] = dmargin
        dneg = np.zeros_like(acts_neg[-1])
        dneg[:, 0] = -dmargin
        return loss, _add_grads(
            _backward(params, acts_pos, dpos), _backward(params, acts_neg, dneg)
        )

    x, actions, weights = arrays
    actions = actions.astype(int)
    acts = _forward_cached(params, x)
    logp = _log_softmax(acts[-1])
    loss = -float(np.mean(weights * logp[np.arange(n), actions]))
    one_hot = np.zeros_like(logp)
    one_hot[np.arange(n), actions] = 1.0
    dout = weights[:, None] * (np.exp(logp) - one_hot) / n
    return loss, _backward(params, acts, dout)


def apply_update(params: Params, grad: Grads, optim: OptimState) -> tuple[Params, OptimState]:
    """One Adam step with bias correction; inputs are left untouched."""
    flat = np.concatenate([g.ravel() for g in grad.weights + grad.biases])
    if not np.all(np.isfinite(flat)):
        raise NumericalError("non-finite gradient")
    t = optim.step_count + 1
    b1, b2 = optim.beta1, optim.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t

    def adam(p, g, m, v):
        m_new = b1 * m + (1.0 - b1) * g
        v_new = b2 * v + (1.0 - b2) * g**2
        p_new = p - optim.learning_rate * (m_new / c1) / (np.sqrt(v_new / c2) + optim.epsilon)
        return p_new, m_new, v_new

    new_w, new_mw, new_vw = [], [], []
    for p, g, m, v in zip(params.weights, grad.weights, optim.m_weights, optim.v_weights):
        pn, mn, vn = adam(p, g, m, v)
        new_w.append(pn)
        new_mw.append(mn)
        new_vw.append(vn)
    new_b, new_mb, new_vb = [], [], []
    for p, g, m, v in zip(params.biases, grad.biases, optim.m_biases, optim.v_biases):
        pn, mn, vn = adam(p, g, m, v)
        new_b.append(pn)
        new_mb.append(mn)
        new_vb.append(vn)

    new_params = Params(dims=params.dims, weights=tuple(new_w), biases=tuple(new_b))
    new_optim = replace(
        optim,
        step_count=t,
        m_weights=tuple(new_mw),
        m_biases=tuple(new_mb),
        v_weights=tuple(new_vw),
        v_biases=tuple(new_vb),
    )
    return new_params, new_optim


def params_to_dict(params: Params) -> dict:
    return {
        "dims": list(params.dims),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(d: dict) -> Params:
    return Params(
        dims=tuple(d["dims"]),
        weights=tuple(np.array(w, dtype=float) for w in d["weights"]),
        biases=tuple(np.array(b, dtype=float) for b in d["biases"]),
    )


def optim_to_dict(optim: OptimState) -> dict:
    return {
        "learning_rate": optim.learning_rate,
        "step_count": optim.step_count,
        "beta1": optim.beta1,
        "beta2": optim.beta2,
        "epsilon": optim.epsilon,
        "m_weights": [m.tolist() for m in optim.m_weights],
        "m_biases": [m.tolist() for m in optim.m_biases],
        "v_weights": [v.tolist() for v in optim.v_weights],
        "v_biases": [v.tolist() for v in optim.v_biases],
    }


def optim_from_dict(d: dict) -> OptimState:
    return OptimState(
        learning_rate=d["learning_rate"],
        step_count=d["step_count"],
        beta1=d["beta1"],
        beta2=d["beta2"],
        epsilon=d["epsilon"],
        m_weights=tuple(np.array(m, dtype=float) for m in d["m_weights"]),
        m_biases=tuple(np.array(m, dtype=float) for m in d["m_biases"]),
        v_weights=tuple(np.array(v, dtype=float) for v in d["v_weights"]),
        v_biases=tuple(np.array(v, dtype=float) for v in d["v_biases"]),
    )
