"""Latent-traversal variance probing.

For each latent dimension k and each data row i: hold every other
dimension at a single posterior sample, sweep dimension k over a grid of L
values, decode each grid point, and record the per-feature sample variance
of the L reconstructions. Averaging over rows gives a K-by-p matrix whose
row k says which features respond when dimension k moves; collapsed
dimensions produce near-zero rows. The same sweep applied to the
conditioning label of a conditional model yields one extra row.
"""

from dataclasses import dataclass

import numpy as np

from .align import aggregate_aligned
from .assoc import AssociationMatrix
from .errors import ConfigError, DataError
from .vae import (LABEL_TRAVERSAL_STREAM, TRAVERSAL_STREAM, decode, encode,
                  posterior_stats, seeded_rng)

STRATEGIES = ("fixed_range", "posterior_scaled", "posterior_centered")

# decode in bounded slabs: chunk rows of i, each expanded L-fold
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class TraversalSpec:
    """Grid strategy for one dimension's sweep.

    fixed_range: [-value, +value] for every row; posterior_scaled:
    [mu - value*sigma, mu + value*sigma] per row; posterior_centered:
    [mu - value, mu + value] per row. `steps` is the grid size L.
    """

    strategy: str = "fixed_range"
    value: float = 15.0
    steps: int = 21

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown traversal strategy {self.strategy!r}; "
                              f"expected one of {STRATEGIES}")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "steps", int(self.steps))
        if not self.value > 0.0:
            raise ConfigError("traversal range parameter must be positive")
        if self.steps < 2:
            raise ConfigError("traversal needs at least 2 grid steps")

    @classmethod
    def fixed_range(cls, value=15.0, steps=21):
        return cls(strategy="fixed_range", value=value, steps=steps)

    @classmethod
    def posterior_scaled(cls, value, steps=21):
        return cls(strategy="posterior_scaled", value=value, steps=steps)

    @classmethod
    def posterior_centered(cls, value, steps=21):
        return cls(strategy="posterior_centered", value=value, steps=steps)


DEFAULT_TRAVERSAL = TraversalSpec()


def resolve_range(spec, mu_ik, sigma_ik, i, k):
    """Concrete (lo, hi) for one (row, dimension); errors on zero width."""
    if spec.strategy == "fixed_range":
        lo, hi = -spec.value, spec.value
    elif spec.strategy == "posterior_scaled":
        half = spec.value * float(sigma_ik)
        lo, hi = float(mu_ik) - half, float(mu_ik) + half
    else:
        lo, hi = float(mu_ik) - spec.value, float(mu_ik) + spec.value
    if hi - lo == 0.0:
        raise DataError(f"degenerate traversal range (width 0) for sample {i}, dimension {k}")
    return lo, hi


def _grid(lo, hi, steps):
    # lo, hi are length-n; returns (n, steps) with exact endpoints
    t = np.linspace(0.0, 1.0, steps)
    return lo[:, None] + (hi - lo)[:, None] * t[None, :]


def traverse_dimension(model, x_i, k, spec=DEFAULT_TRAVERSAL, rng=None, y_i=None):
    """Decode the L-point sweep of dimension k for a single data row.

    Every other dimension sits at one posterior sample drawn from `rng`.
    Returns an (L, p) array of reconstructions.
    """
    if not 0 <= k < model.latent_dim:
        raise ConfigError(f"dimension {k} out of range for K={model.latent_dim}")
    x_i = np.asarray(x_i, dtype=np.float64).reshape(1, -1)
    if model.conditional:
        if y_i is None:
            raise DataError("conditional model traversal needs the row's label")
        enc_in = np.concatenate([x_i, np.array([[float(y_i)]])], axis=1)
    else:
        enc_in = x_i
    if rng is None:
        rng = seeded_rng(model.seed, TRAVERSAL_STREAM)
    mu, log_var, _ = encode(model, enc_in)
    sigma = np.exp(0.5 * log_var)
    eps = rng.standard_normal((1, model.latent_dim))
    z_base = (mu + sigma * eps)[0]
    lo, hi = resolve_range(spec, mu[0, k], sigma[0, k], 0, k)
    grid = _grid(np.array([lo]), np.array([hi]), spec.steps)[0]
    z = np.tile(z_base, (spec.steps, 1))
    z[:, k] = grid
    if model.conditional:
        z = np.concatenate([z, np.full((spec.steps, 1), float(y_i))], axis=1)
    return decode(model, z)


def _run_inputs(model, dataset):
    x = np.asarray(dataset.train_x, dtype=np.float64)
    if x.shape[0] == 0:
        raise DataError("traversal needs a non-empty training split")
    if model.conditional:
        y = dataset.train_y
        if y is None:
            raise DataError("conditional model traversal needs a labeled dataset")
        enc_in = np.concatenate([x, np.asarray(y, dtype=np.float64)[:, None]], axis=1)
        return x, np.asarray(y, dtype=np.float64), enc_in
    return x, None, x


def fvh_lt_run(model, dataset, spec=DEFAULT_TRAVERSAL, rng=None):
    """Traversal-variance matrix for one trained model.

    Entry (k, j) is the mean over training rows of the unbiased sample
    variance (divisor L-1) of feature j along dimension k's sweep. The
    per-dimension mean KL over the same rows rides along for the
    informative/collapsed split downstream.
    """
    x, y, enc_in = _run_inputs(model, dataset)
    n, kdim = x.shape[0], model.latent_dim
    if rng is None:
        rng = seeded_rng(model.seed, TRAVERSAL_STREAM)
    stats = posterior_stats(model, enc_in)
    mu, sigma = stats.mu, np.exp(0.5 * stats.log_var)
    mean_kl = stats.mean_kl

    values = np.zeros((kdim, model.feature_dim))
    steps = spec.steps
    for k in range(kdim):
        # one fresh posterior sample per (i, k); drawn for the full column
        # up front so chunked decoding cannot shift the rng stream
        eps = rng.standard_normal((n, kdim))
        z_base = mu + sigma * eps
        if spec.strategy == "fixed_range":
            lo = np.full(n, -spec.value)
            hi = np.full(n, spec.value)
        elif spec.strategy == "posterior_scaled":
            half = spec.value * sigma[:, k]
            lo, hi = mu[:, k] - half, mu[:, k] + half
        else:
            lo, hi = mu[:, k] - spec.value, mu[:, k] + spec.value
        dead = np.nonzero(hi - lo == 0.0)[0]
        if dead.size:
            raise DataError(f"degenerate traversal range (width 0) for sample {int(dead[0])}, dimension {k}")
        grid = _grid(lo, hi, steps)

        acc = np.zeros(model.feature_dim)
        for start in range(0, n, _CHUNK_ROWS):
            stop = min(start + _CHUNK_ROWS, n)
            m = stop - start
            z = np.repeat(z_base[start:stop], steps, axis=0)
            z[:, k] = grid[start:stop].ravel()
            if model.conditional:
                z = np.concatenate([z, np.repeat(y[start:stop], steps)[:, None]], axis=1)
            decoded = decode(model, z).reshape(m, steps, model.feature_dim)
            acc += decoded.var(axis=1, ddof=1).sum(axis=0)
        values[k] = acc / n
    return AssociationMatrix(values=values, kind="fvh_lt_variance",
                             mean_kl=mean_kl, feature_names=dataset.feature_names)


def fvh_lt_aggregate(runs, mapping):
    """Element-wise mean of aligned per-run traversal matrices."""
    return aggregate_aligned(runs, mapping)


def cvae_quality_traversal(model, dataset, spec=DEFAULT_TRAVERSAL, rng=None):
    """Per-feature variance when the conditioning label is swept.

    The label runs over its observed training range with L steps; the
    latent vector stays at one posterior sample per row. Returns a length-p
    row on the same scale as fvh_lt_run's entries.
    """
    if not model.conditional:
        raise ConfigError("label traversal needs a conditional model")
    x, y, enc_in = _run_inputs(model, dataset)
    n = x.shape[0]
    if rng is None:
        rng = seeded_rng(model.seed, LABEL_TRAVERSAL_STREAM)
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi - lo == 0.0:
        raise DataError("degenerate label traversal range: label is constant on the training split")
    grid = np.linspace(lo, hi, spec.steps)

    stats = posterior_stats(model, enc_in)
    mu, sigma = stats.mu, np.exp(0.5 * stats.log_var)
    eps = rng.standard_normal((n, model.latent_dim))
    z_base = mu + sigma * eps

    steps = spec.steps
    acc = np.zeros(model.feature_dim)
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        m = stop - start
        z = np.repeat(z_base[start:stop], steps, axis=0)
        ycol = np.tile(grid, m)[:, None]
        decoded = decode(model, np.concatenate([z, ycol], axis=1))
        decoded = decoded.reshape(m, steps, model.feature_dim)
        acc += decoded.var(axis=1, ddof=1).sum(axis=0)
    return acc / n
