"""Dirty-model block-sparse regression over posterior means.

The probe regresses each latent dimension's posterior mean on the input
features, all dimensions jointly, with the coefficient matrix split into
a specific part S (entrywise-sparse, penalized by its elementwise l1
norm) and a shared part G (row-sparse, penalized by the sum over feature
rows of each row's max absolute entry):

    (2n)^-1 ||Mu - X(S + G)||_F^2
        + lambda_specific * sum|S| + lambda_shared * sum_rows max|G_row|

Solved by alternating proximal gradient with the exact Lipschitz step, so
the objective never increases. Nonzero rows of |S| point at features tied
to one particular latent dimension, which is the association signal the
rest of the pipeline consumes.
"""

from dataclasses import dataclass

import numpy as np

from .align import aggregate_aligned, greedy_align
from .assoc import AssociationMatrix
from .errors import ConfigError, DataError, TrainingDivergence


def prox_l1(v, t):
    """Elementwise soft threshold: sign(v) * max(|v| - t, 0)."""
    if t < 0.0:
        raise ConfigError("soft-threshold level must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_l1_ball(v, radius):
    """Euclidean projection of a vector onto {w : ||w||_1 <= radius}.

    Sort-based exact algorithm; O(K log K) in the row length.
    """
    v = np.asarray(v, dtype=np.float64)
    if radius <= 0.0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    rho = int(np.count_nonzero(u - (css - radius) / j > 0.0))
    theta = (css[rho - 1] - radius) / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def prox_linf_row(v, t):
    """Prox of t * max_k |v_k| via the Moreau identity: v minus its
    projection onto the l1 ball of radius t."""
    if t < 0.0:
        raise ConfigError("row prox level must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return v - project_l1_ball(v, t)


def _prox_linf_rows(m, t):
    # all feature rows at once; the sorted-prefix rule vectorizes cleanly
    if t < 0.0:
        raise ConfigError("row prox level must be non-negative")
    m = np.asarray(m, dtype=np.float64)
    if t == 0.0:
        return m.copy()
    a = np.abs(m)
    over = a.sum(axis=1) > t
    out = m.copy()
    if not over.any():
        return np.zeros_like(m)  # every row fits inside the ball
    sub = m[over]
    a_sub = a[over]
    u = np.sort(a_sub, axis=1)[:, ::-1]
    css = np.cumsum(u, axis=1)
    j = np.arange(1, u.shape[1] + 1)
    rho = np.count_nonzero(u - (css - t) / j > 0.0, axis=1)
    theta = (css[np.arange(rho.size), rho - 1] - t) / rho
    proj = np.sign(sub) * np.maximum(a_sub - theta[:, None], 0.0)
    out[over] = sub - proj
    out[~over] = 0.0
    return out


@dataclass(frozen=True)
class DirtyModelProblem:
    """One regression instance: shared design matrix, per-dimension
    responses, and the two penalty weights."""

    x: np.ndarray
    mu: np.ndarray
    lambda_specific: float
    lambda_shared: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        mu = np.asarray(self.mu, dtype=np.float64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mu", mu)
        if x.ndim != 2 or mu.ndim != 2:
            raise ConfigError("design and response must be 2-d arrays")
        if x.shape[0] != mu.shape[0]:
            raise ConfigError(f"design has {x.shape[0]} rows, responses {mu.shape[0]}")
        if x.shape[0] == 0:
            raise DataError("regression needs at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(mu))):
            raise DataError("non-finite values in regression inputs")
        for name in ("lambda_specific", "lambda_shared"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0.0:
                raise ConfigError(f"{name} must be a non-negative finite float")
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class DirtySolution:
    specific: np.ndarray  # p x K
    shared: np.ndarray    # p x K
    trace: tuple
    iterations: int
    converged: bool

    @property
    def combined(self):
        return self.specific + self.shared


def dirty_objective(problem, specific, shared):
    resid = problem.mu - problem.x @ (specific + shared)
    n = problem.x.shape[0]
    return float(np.sum(resid * resid) / (2.0 * n)
                 + problem.lambda_specific * np.abs(specific).sum()
                 + problem.lambda_shared * np.abs(shared).max(axis=1).sum())


def dirty_solve(problem, step=None, max_iters=10_000, tol=1e-8):
    """Alternating proximal gradient from the zero start.

    Each sweep takes a prox-gradient step on the specific part (soft
    threshold) with the shared part fixed, recomputes the gradient, then
    steps the shared part (row-wise l-infinity prox). The default step is
    1 / sigma_max(X / sqrt(n))^2, the exact Lipschitz constant of either
    block's smooth gradient, which makes every half-step non-increasing.
    Stops when |previous - current| <= tol * max(1, |previous|).
    """
    x, mu = problem.x, problem.mu
    n, p = x.shape
    kdim = mu.shape[1]
    if step is None:
        smax = float(np.linalg.norm(x, 2)) / np.sqrt(n)
        step = 1.0 if smax == 0.0 else 1.0 / (smax * smax)
    elif step <= 0.0:
        raise ConfigError("step must be positive")
    if max_iters < 1:
        raise ConfigError("max_iters must be at least 1")

    specific = np.zeros((p, kdim))
    shared = np.zeros((p, kdim))
    trace = [dirty_objective(problem, specific, shared)]
    converged = False
    iterations = 0
    for it in range(max_iters):
        grad = -(x.T @ (mu - x @ (specific + shared))) / n
        specific = prox_l1(specific - step * grad, step * problem.lambda_specific)
        grad = -(x.T @ (mu - x @ (specific + shared))) / n
        shared = _prox_linf_rows(shared - step * grad, step * problem.lambda_shared)
        obj = dirty_objective(problem, specific, shared)
        if not np.isfinite(obj):
            raise TrainingDivergence(f"regression objective left the reals at iteration {it}")
        prev = trace[-1]
        trace.append(obj)
        iterations = it + 1
        if abs(prev - obj) <= tol * max(1.0, abs(prev)):
            converged = True
            break
    return DirtySolution(specific=specific, shared=shared, trace=tuple(trace),
                         iterations=iterations, converged=converged)


@dataclass(frozen=True)
class DbsrResult:
    """Aggregated association matrices plus their provenance."""

    magnitude: AssociationMatrix
    signed: AssociationMatrix
    mapping: object
    per_run_magnitude: tuple
    per_run_signed: tuple
    solutions: tuple


def dbsr_ls(runs, dataset, lambda_specific, lambda_shared, rho=0.5, seed=0,
            max_iters=10_000, tol=1e-8):
    """Sparse-regression probe across R trained runs.

    Per run: regress that run's training-split posterior means on the
    (centered) standardized features, transpose the specific part to
    latent-by-feature, and keep both |S| and signed S. The magnitude
    matrices are aligned across runs greedily; the same mapping aggregates
    the signed ones, whose entries can cancel and are kept for inspection
    only.
    """
    runs = list(runs)
    if not runs:
        raise ConfigError("dbsr_ls needs at least one trained run")
    x = np.asarray(dataset.train_x, dtype=np.float64)
    x = x - x.mean(axis=0)
    mags, signs, sols = [], [], []
    for model in runs:
        stats = model.posterior
        if stats is None or stats.mu.shape[0] != x.shape[0]:
            raise DataError("run posterior does not cover the dataset's training split")
        mu = stats.mu - stats.mu.mean(axis=0)
        problem = DirtyModelProblem(x=x, mu=mu, lambda_specific=lambda_specific,
                                    lambda_shared=lambda_shared)
        sol = dirty_solve(problem, max_iters=max_iters, tol=tol)
        sols.append(sol)
        signed = sol.specific.T  # latent-by-feature
        mean_kl = stats.mean_kl
        mags.append(AssociationMatrix(values=np.abs(signed), kind="dbsr_magnitude",
                                      mean_kl=mean_kl, feature_names=dataset.feature_names))
        signs.append(AssociationMatrix(values=signed, kind="dbsr_signed",
                                       mean_kl=mean_kl, feature_names=dataset.feature_names))
    mapping = greedy_align(mags, rho=rho, seed=seed)
    magnitude = aggregate_aligned(mags, mapping)
    signed = aggregate_aligned(signs, mapping)
    return DbsrResult(magnitude=magnitude, signed=signed, mapping=mapping,
                      per_run_magnitude=tuple(mags), per_run_signed=tuple(signs),
                      solutions=tuple(sols))
