"""Disentanglement scoring.

Three views of how cleanly latent dimensions separate: a pairwise
row-contrast index on association matrices (0 = entangled or degenerate,
1 = fully separated supports), the classic fixed-factor classification
score computed from a synthetic generator, and a false-discovery-rate
check of the informative dimensions against known factor blocks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .vae import encode, stack_conditional

DEGENERATE_NONE = "none"
DEGENERATE_ALL_ZERO = "all_zero"
DEGENERATE_DOMINANT_ROW = "dominant_row"


@dataclass(frozen=True)
class LsdiReport:
    """Pairwise separation index with its degenerate-case flag.

    value = sum over unordered row pairs of ||a_i - a_j||_1 divided by the
    sum of (||a_i||_1 + ||a_j||_1), both on |A|; forced to 0 when the
    matrix is all zero or one row elementwise dominates every other.
    pair_contributions holds (i, j, numerator, denominator) per pair.
    """

    value: float
    degenerate_case: str
    pair_contributions: tuple


def lsdi(matrix):
    """Latent-separation index of an association matrix.

    Accepts an AssociationMatrix or a bare 2-d array; only absolute values
    are ever read. Requires at least two rows.
    """
    values = getattr(matrix, "values", matrix)
    a = np.abs(np.asarray(values, dtype=np.float64))
    if a.ndim != 2:
        raise ConfigError("separation index needs a 2-d matrix")
    kdim = a.shape[0]
    if kdim < 2:
        raise ConfigError("separation index is undefined for fewer than 2 latent rows")

    pairs = []
    num_total = 0.0
    den_total = 0.0
    norms = a.sum(axis=1)
    for i in range(kdim):
        for j in range(i + 1, kdim):
            num = float(np.abs(a[i] - a[j]).sum())
            den = float(norms[i] + norms[j])
            pairs.append((i, j, num, den))
            num_total += num
            den_total += den

    if a.sum() == 0.0:
        return LsdiReport(value=0.0, degenerate_case=DEGENERATE_ALL_ZERO,
                          pair_contributions=tuple(pairs))
    col_max = a.max(axis=0)
    for i in range(kdim):
        if np.all(a[i] >= col_max):
            return LsdiReport(value=0.0, degenerate_case=DEGENERATE_DOMINANT_ROW,
                              pair_contributions=tuple(pairs))
    return LsdiReport(value=num_total / den_total, degenerate_case=DEGENERATE_NONE,
                      pair_contributions=tuple(pairs))


# ---------------------------------------------------------------------------
# fixed-factor classification score

@dataclass(frozen=True)
class ScoreReport:
    accuracy: float
    chance: float
    train_votes: int
    test_votes: int


def _softmax_fit(features, labels, n_classes, lr=0.5, max_iters=3000, grad_tol=1e-6):
    # full-batch GD on multinomial logistic loss; deterministic zero init
    n = features.shape[0]
    x = np.concatenate([features, np.ones((n, 1))], axis=1)
    w = np.zeros((x.shape[1], n_classes))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0
    for _ in range(max_iters):
        logits = x @ w
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        grad = x.T @ (p - onehot) / n
        if float(np.abs(grad).max()) < grad_tol:
            break
        w -= lr * grad
    return w


def _softmax_predict(w, features):
    x = np.concatenate([features, np.ones((features.shape[0], 1))], axis=1)
    return np.argmax(x @ w, axis=1)


def _sample_factor_pairs(truth, stdz, f_idx, n_pairs, rng):
    m = truth.n_factors
    f1 = rng.standard_normal((n_pairs, m))
    f2 = rng.standard_normal((n_pairs, m))
    sharedv = rng.standard_normal(n_pairs)
    f1[:, f_idx] = sharedv
    f2[:, f_idx] = sharedv
    p = truth.loadings.shape[0]
    x1 = f1 @ truth.loadings.T + truth.noise_std * rng.standard_normal((n_pairs, p))
    x2 = f2 @ truth.loadings.T + truth.noise_std * rng.standard_normal((n_pairs, p))
    return stdz.apply(x1), stdz.apply(x2)


def _synth_label(truth, stdz, x_std, rng):
    a, b = truth.label_features
    y_raw = x_std[:, a] + x_std[:, b] + truth.label_noise * rng.standard_normal(x_std.shape[0])
    return (y_raw - stdz.label_mean) / stdz.label_std


def higgins_score(dataset, model, pairs_per_vote=64, votes=1000,
                  train_fraction=0.8, rng=None):
    """Fixed-factor classification score on a synthetic generator.

    Each vote fixes one factor, draws `pairs_per_vote` sample pairs sharing
    that factor's value (fresh value per pair, everything else resampled),
    encodes both sides deterministically, and averages |mu_1 - mu_2| into
    one feature vector labeled by the fixed factor. A multinomial linear
    classifier trained on the first `train_fraction` of votes is scored on
    the rest. Chance level is 1/(number of factors).
    """
    truth = dataset.ground_truth
    if truth is None:
        raise DataError("factor-classification score needs a dataset with controllable factors")
    if model.conditional and truth.label_features is None:
        raise DataError("conditional model scoring needs a generated label recipe")
    if rng is None:
        rng = np.random.default_rng(0)
    if votes < 2 or pairs_per_vote < 1:
        raise ConfigError("need at least 2 votes and 1 pair per vote")

    m = truth.n_factors
    stdz = dataset.standardization
    feats = np.empty((votes, model.latent_dim))
    labels = np.empty(votes, dtype=np.int64)
    for b in range(votes):
        f_idx = int(rng.integers(m))
        x1, x2 = _sample_factor_pairs(truth, stdz, f_idx, pairs_per_vote, rng)
        if model.conditional:
            x1 = stack_conditional(x1, _synth_label(truth, stdz, x1, rng))
            x2 = stack_conditional(x2, _synth_label(truth, stdz, x2, rng))
        mu1, _, _ = encode(model, x1)
        mu2, _, _ = encode(model, x2)
        feats[b] = np.abs(mu1 - mu2).mean(axis=0)
        labels[b] = f_idx

    n_train = int(round(votes * train_fraction))
    if n_train < 1 or n_train >= votes:
        raise ConfigError("vote split leaves an empty train or test side")
    mean = feats[:n_train].mean(axis=0)
    std = feats[:n_train].std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    feats_std = (feats - mean) / std

    w = _softmax_fit(feats_std[:n_train], labels[:n_train], m)
    pred = _softmax_predict(w, feats_std[n_train:])
    accuracy = float(np.mean(pred == labels[n_train:]))
    return ScoreReport(accuracy=accuracy, chance=1.0 / m,
                       train_votes=n_train, test_votes=votes - n_train)


# ---------------------------------------------------------------------------
# informative-dimension discovery vs ground truth

@dataclass(frozen=True)
class FdrReport:
    """False-discovery accounting of the informative set.

    assignment rows are (latent dim, assigned factor, is_true_positive);
    a dim is a true positive only when it is the unique strongest dim for
    its factor among the informative set.
    """

    fdr: float
    recall: float
    assignment: tuple


def informative_fdr(matrix, truth):
    blocks = truth.blocks
    if not blocks:
        raise ConfigError("ground truth has no factor blocks")
    a = np.abs(matrix.values)
    info = list(matrix.informative)
    if not info:
        return FdrReport(fdr=0.0, recall=0.0, assignment=())

    scores = np.zeros((len(info), len(blocks)))
    for d, dim in enumerate(info):
        for f, block in enumerate(blocks):
            scores[d, f] = a[dim, list(block)].sum()
    assigned = scores.argmax(axis=1)  # ties go to the lowest factor index

    rows = []
    tp_factors = set()
    for f in range(len(blocks)):
        members = [d for d in range(len(info)) if assigned[d] == f]
        if not members:
            continue
        best = max(scores[d, f] for d in members)
        winners = [d for d in members if scores[d, f] == best]
        for d in members:
            is_tp = len(winners) == 1 and d == winners[0]
            rows.append((info[d], f, is_tp))
            if is_tp:
                tp_factors.add(f)
    rows.sort()
    tp = sum(1 for r in rows if r[2])
    fp = len(rows) - tp
    return FdrReport(fdr=fp / max(1, fp + tp),
                     recall=len(tp_factors) / len(blocks),
                     assignment=tuple(rows))


# ---------------------------------------------------------------------------
# posterior summaries

@dataclass(frozen=True)
class KlSummary:
    mean_kl: np.ndarray
    mu_hist: tuple       # (counts, bin edges)
    var_hist: tuple


def kl_summary(stats, bins=30):
    """Column-mean KL plus histograms of posterior means and variances."""
    kl = np.asarray(stats.kl_per_dim, dtype=np.float64)
    if kl.shape[0] == 0:
        mean = np.zeros(kl.shape[1])
        empty = (np.zeros(bins, dtype=np.int64), np.linspace(0.0, 1.0, bins + 1))
        return KlSummary(mean_kl=mean, mu_hist=empty, var_hist=empty)
    mean = kl.mean(axis=0)
    mu_counts, mu_edges = np.histogram(stats.mu.ravel(), bins=bins)
    var_counts, var_edges = np.histogram(np.exp(stats.log_var).ravel(), bins=bins)
    return KlSummary(mean_kl=mean,
                     mu_hist=(mu_counts, mu_edges),
                     var_hist=(var_counts, var_edges))
