"""Dense multilayer perceptrons, optimizers, and gradient verification.

Two forward paths exist and must stay numerically identical: `mlp_forward`
builds a differentiable graph for training, `mlp_apply` is a plain-numpy
pass for evaluation-time work (posterior statistics, traversal decoding)
where tape overhead would dominate. Both run the same numpy calls in the
same order.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, TrainingDivergence

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "identity")


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths, hidden activation, and dropout for a dense net.

    `widths` runs input -> hidden... -> output; the activation applies to
    hidden layers only and the output layer is always linear. Dropout (when
    nonzero) follows each hidden activation and only acts when a forward
    pass is made with training=True.
    """

    widths: tuple
    activation: str = "relu"
    dropout: float = 0.0
    leaky_slope: float = 0.2

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("MlpSpec needs at least input and output widths")
        if any(int(w) != w or w < 1 for w in self.widths):
            raise ConfigError(f"invalid layer widths {self.widths}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def n_layers(self):
        return len(self.widths) - 1


def init_mlp(spec, rng):
    """Seeded parameter dict {w0, b0, w1, b1, ...} for `spec`.

    Hidden layers under relu/leaky_relu use Kaiming-uniform limits
    sqrt(6/fan_in); the linear output layer (and every layer of a linear or
    sigmoid net) uses Xavier-uniform sqrt(6/(fan_in+fan_out)). Biases start
    at zero.
    """
    params = {}
    for i in range(spec.n_layers):
        fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
        hidden = i < spec.n_layers - 1
        if hidden and spec.activation in ("relu", "leaky_relu"):
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        params[f"w{i}"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def _activate(spec, h):
    if spec.activation == "relu":
        return ad.relu(h)
    if spec.activation == "leaky_relu":
        return ad.leaky_relu(h, spec.leaky_slope)
    if spec.activation == "sigmoid":
        return ad.sigmoid(h)
    return h


def mlp_forward(spec, params, x, training=False, rng=None):
    """Differentiable forward pass; returns a Var.

    `params` values may be Vars (gradients wanted) or plain arrays (frozen).
    With training=True and spec.dropout > 0, inverted dropout masks are
    drawn from `rng` after each hidden activation.
    """
    h = x
    n_in = ad.data_of(x).shape[1]
    if n_in != spec.widths[0]:
        raise ConfigError(f"input has {n_in} columns, spec expects {spec.widths[0]}")
    drop = training and spec.dropout > 0.0
    if drop and rng is None:
        raise ConfigError("training-mode dropout needs an rng")
    for i in range(spec.n_layers):
        h = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
        if i < spec.n_layers - 1:
            h = _activate(spec, h)
            if drop:
                keep = 1.0 - spec.dropout
                mask = (rng.random(ad.data_of(h).shape) < keep) / keep
                h = ad.mul(h, mask)
    return h


def mlp_apply(spec, params, x, training=False, rng=None):
    """Plain-numpy forward pass, numerically identical to mlp_forward."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[1] != spec.widths[0]:
        raise ConfigError(f"input has {h.shape[1]} columns, spec expects {spec.widths[0]}")
    drop = training and spec.dropout > 0.0
    for i in range(spec.n_layers):
        h = h @ params[f"w{i}"] + params[f"b{i}"]
        if i < spec.n_layers - 1:
            if spec.activation == "relu":
                h = np.maximum(h, 0.0)
            elif spec.activation == "leaky_relu":
                h = np.where(h > 0.0, h, spec.leaky_slope * h)
            elif spec.activation == "sigmoid":
                h = ad._sigmoid_data(h)
            if drop:
                keep = 1.0 - spec.dropout
                h = h * ((rng.random(h.shape) < keep) / keep)
    return h


# ---------------------------------------------------------------------------
# optimizers

@dataclass(frozen=True)
class AdamState:
    """Adam moment buffers; adam_step returns a fresh state every call."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    if lr <= 0:
        raise ConfigError("learning rate must be positive")
    zeros = lambda: {k: np.zeros_like(p) for k, p in params.items()}
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0, m=zeros(), v=zeros())


def adam_step(state, params, grads):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence(f"non-finite gradient for parameter {name!r}")
        m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = m[name] / (1.0 - state.beta1 ** t)
        v_hat = v[name] / (1.0 - state.beta2 ** t)
        new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2,
                          eps=state.eps, step=t, m=m, v=v)
    return new_params, new_state


def sgd_step(params, grads, lr):
    """Plain gradient descent (used by the decorrelation-penalty recipes)."""
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergence(f"non-finite gradient for parameter {name!r}")
        out[name] = p - lr * g
    return out


# ---------------------------------------------------------------------------
# verification

def grad_check(f, params, h=1e-5):
    """Max relative gap between tape gradients and central differences.

    `f` maps a dict of Vars (same keys as `params`) to a scalar Var and must
    be deterministic: any noise it uses has to be frozen across calls. The
    returned value is max over parameter entries of
    |analytic - numeric| / max(1, |analytic|).
    """
    leaves = {k: ad.Var(np.array(p, dtype=np.float64)) for k, p in params.items()}
    root = f(leaves)
    ad.backward(root)

    def value_at(plain):
        out = ad.data_of(f({k: ad.Var(p) for k, p in plain.items()}))
        return float(np.asarray(out).reshape(()))

    worst = 0.0
    for name, leaf in leaves.items():
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for idx in np.ndindex(*leaf.data.shape):
            plus = {k: np.array(p, dtype=np.float64) for k, p in params.items()}
            minus = {k: np.array(p, dtype=np.float64) for k, p in params.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            numeric = (value_at(plus) - value_at(minus)) / (2.0 * h)
            gap = abs(analytic[idx] - numeric) / max(1.0, abs(analytic[idx]))
            worst = max(worst, gap)
    return worst
