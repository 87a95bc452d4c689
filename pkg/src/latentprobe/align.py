"""Cross-run latent alignment.

Independently trained runs put the same discovered factor in different
latent slots. This module (a) splits each run's dimensions into
informative vs collapsed by exact two-cluster 1-D k-means on their mean
KL values, (b) picks the run with the most informative dimensions as the
reference, and (c) greedily matches the other runs' informative rows to
the reference's by Pearson correlation of their association rows,
assigning leftovers deterministically at random. The result is one
permutation per run that makes element-wise aggregation meaningful.
"""

from dataclasses import dataclass

import numpy as np

from .assoc import AssociationMatrix
from .errors import ConfigError

KL_DEGENERATE_SPAN = 1e-6


@dataclass(frozen=True)
class InformativeSplit:
    """Two-cluster split of per-dimension KL values (indices 0-based)."""

    informative: tuple
    low_centroid: float
    high_centroid: float


@dataclass(frozen=True)
class MatchInfo:
    """How one latent dimension got its reference slot."""

    by: str  # "correlation" | "random" | "reference"
    correlation: float = None


@dataclass(frozen=True)
class AlignmentMapping:
    """Per-run bijections onto the reference run's latent order.

    maps[r][j] is the reference position of run r's dimension j;
    provenance[r][j] records whether that entry came from a correlation
    match (with its value), from the random residual assignment, or from
    being the reference run itself.
    """

    reference_run: int
    maps: tuple
    provenance: tuple

    def __post_init__(self):
        for r, m in enumerate(self.maps):
            if sorted(m) != list(range(len(m))):
                raise ConfigError(f"alignment map for run {r} is not a bijection")

    def to_json_dict(self):
        return {
            "reference_run": self.reference_run,
            "maps": [list(m) for m in self.maps],
            "provenance": [
                [{"by": e.by} if e.correlation is None
                 else {"by": e.by, "correlation": e.correlation} for e in row]
                for row in self.provenance
            ],
        }


def split_informative(mean_kl):
    """Exact 1-D 2-means over the K mean-KL values.

    The scan over sorted split points finds the global optimum; the higher
    cluster is informative. When every value sits within 1e-6 of the rest
    there is nothing to separate and the informative set is empty (the
    all-collapsed case).
    """
    v = np.asarray(mean_kl, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ConfigError("informative split needs a vector of at least 2 KL values")
    kdim = v.size
    if float(v.max() - v.min()) <= KL_DEGENERATE_SPAN:
        c = float(v.mean())
        return InformativeSplit(informative=(), low_centroid=c, high_centroid=c)

    order = np.argsort(v, kind="stable")
    sv = v[order]
    csum = np.cumsum(sv)
    sq = float(np.sum(sv * sv))
    best_s, best_sse = None, None
    for s in range(1, kdim):
        m1 = csum[s - 1] / s
        m2 = (csum[-1] - csum[s - 1]) / (kdim - s)
        sse = sq - s * m1 * m1 - (kdim - s) * m2 * m2
        if best_sse is None or sse < best_sse:
            best_s, best_sse = s, sse
    upper = order[best_s:]
    lower = order[:best_s]
    return InformativeSplit(informative=tuple(sorted(int(i) for i in upper)),
                            low_centroid=float(sv[:best_s].mean()),
                            high_centroid=float(sv[best_s:].mean()))


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    na = float(np.sqrt(a @ a))
    nb = float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        return 0.0  # constant rows carry no matchable shape
    return float((a @ b) / (na * nb))


def greedy_align(runs, rho=0.5, seed=0):
    """Alignment mapping over per-run association matrices.

    Reference = run with the most informative dimensions (ties: lowest
    index). For every other run, the correlation matrix between reference
    and run informative rows is consumed greedily: repeatedly take the
    globally largest entry while it exceeds `rho` (ties: lexicographically
    smallest index pair), then assign all unmatched dimensions randomly but
    reproducibly from SeedSequence((seed, run index)).
    """
    runs = list(runs)
    if not runs:
        raise ConfigError("alignment needs at least one run")
    kdim = runs[0].n_latents
    for r, m in enumerate(runs[1:], start=1):
        if m.n_latents != kdim or m.n_features != runs[0].n_features:
            raise ConfigError(f"run {r} shape differs from run 0")
    splits = [split_informative(m.mean_kl) if kdim >= 2 else InformativeSplit((), 0.0, 0.0)
              for m in runs]
    sizes = [len(s.informative) for s in splits]
    ref = int(np.argmax(sizes))  # argmax takes the first of equals
    ref_rows = runs[ref].values

    maps, provenance = [], []
    for r, run in enumerate(runs):
        if r == ref:
            maps.append(tuple(range(kdim)))
            provenance.append(tuple(MatchInfo(by="reference") for _ in range(kdim)))
            continue
        ref_idx = list(splits[ref].informative)
        run_idx = list(splits[r].informative)
        corr = np.empty((len(ref_idx), len(run_idx)))
        for a, i in enumerate(ref_idx):
            for b, j in enumerate(run_idx):
                corr[a, b] = _pearson(ref_rows[i], run.values[j])

        fmap = {}
        info = {}
        live = corr.copy()
        while live.size and float(live.max()) > rho:
            flat = int(np.argmax(live))  # first occurrence = smallest (i, j)
            a, b = divmod(flat, live.shape[1])
            i, j = ref_idx[a], run_idx[b]
            fmap[j] = i
            info[j] = MatchInfo(by="correlation", correlation=float(live[a, b]))
            live = np.delete(np.delete(live, a, axis=0), b, axis=1)
            del ref_idx[a], run_idx[b]

        rem_run = sorted(set(range(kdim)) - set(fmap))
        rem_ref = sorted(set(range(kdim)) - set(fmap.values()))
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), int(r))))
        perm = rng.permutation(len(rem_ref))
        for t, j in enumerate(rem_run):
            fmap[j] = rem_ref[int(perm[t])]
            info[j] = MatchInfo(by="random")
        maps.append(tuple(fmap[j] for j in range(kdim)))
        provenance.append(tuple(info[j] for j in range(kdim)))
    return AlignmentMapping(reference_run=ref, maps=tuple(maps), provenance=tuple(provenance))


def apply_mapping(matrix, map_entry):
    """Permute a matrix's rows so run dimension j lands at map_entry[j].

    Accepts one entry of AlignmentMapping.maps. Values, mean KL, and the
    informative set all move together.
    """
    fmap = [int(i) for i in map_entry]
    if sorted(fmap) != list(range(matrix.n_latents)):
        raise ConfigError("mapping is not a bijection on the latent indices")
    order = [0] * len(fmap)
    for src, dst in enumerate(fmap):
        order[dst] = src
    return matrix.permuted(order)


def aggregate_aligned(runs, mapping):
    """Element-wise mean of per-run matrices after alignment.

    Values and mean-KL vectors are averaged once each run has been permuted
    by its map; the informative set is re-derived from the averaged KL so it
    describes the aggregate rather than any single run.
    """
    runs = list(runs)
    if not runs:
        raise ConfigError("nothing to aggregate")
    shape = runs[0].values.shape
    kind = runs[0].kind
    for m in runs[1:]:
        if m.values.shape != shape:
            raise ConfigError(f"shape mismatch in aggregation: {m.values.shape} vs {shape}")
        if m.kind != kind:
            raise ConfigError(f"kind mismatch in aggregation: {m.kind} vs {kind}")
    if len(mapping.maps) != len(runs):
        raise ConfigError(f"mapping covers {len(mapping.maps)} runs, got {len(runs)}")
    aligned = [apply_mapping(m, mapping.maps[r]) for r, m in enumerate(runs)]
    values = np.mean([m.values for m in aligned], axis=0)
    mean_kl = np.mean([m.mean_kl for m in aligned], axis=0)
    informative = split_informative(mean_kl).informative if shape[0] >= 2 else ()
    return AssociationMatrix(values=values, kind=kind, mean_kl=mean_kl,
                             feature_names=runs[0].feature_names,
                             informative=informative)
