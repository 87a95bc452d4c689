"""Latent-by-feature association matrices and their CSV form.

Both probes (traversal variance and sparse regression) reduce a trained
model to a K-by-p table: how strongly does moving latent dimension k show
up in output feature j. This module is the common container plus a stable
CSV rendering used by reports and by the aggregation step.

CSV layout: header `latent_index,<feature names...>,mean_kl[,kind]`, one
row per latent dimension. Floats are written with repr so parsing returns
the exact same float64 values.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError

KINDS = ("fvh_lt_variance", "dbsr_magnitude", "dbsr_signed")
_NONNEGATIVE_KINDS = ("fvh_lt_variance", "dbsr_magnitude")


@dataclass(frozen=True)
class AssociationMatrix:
    """K-by-p association strengths with per-dimension bookkeeping.

    values[k, j] scores latent dimension k against feature j. mean_kl[k] is
    that dimension's average posterior divergence over the probe inputs,
    used downstream to sort and to spot collapsed dimensions. informative
    holds the latent indices judged to carry signal (sorted, possibly
    empty); it is filled in by the alignment stage and empty before that.
    """

    values: np.ndarray
    kind: str
    mean_kl: np.ndarray
    feature_names: tuple
    informative: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown association kind {self.kind!r}; expected one of {KINDS}")
        values = np.asarray(self.values, dtype=np.float64)
        mean_kl = np.asarray(self.mean_kl, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mean_kl", mean_kl)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "informative", tuple(int(k) for k in self.informative))
        if values.ndim != 2:
            raise ConfigError("association values must be a 2-d array")
        k, p = values.shape
        if mean_kl.shape != (k,):
            raise ConfigError(f"mean_kl has shape {mean_kl.shape}, expected ({k},)")
        if len(self.feature_names) != p:
            raise ConfigError(f"{len(self.feature_names)} feature names for {p} columns")
        if any(not 0 <= i < k for i in self.informative):
            raise ConfigError("informative latent index out of range")
        if self.kind in _NONNEGATIVE_KINDS and values.size and values.min() < 0:
            raise ConfigError(f"negative entries in {self.kind} association matrix")

    @property
    def n_latents(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    def with_informative(self, informative):
        return replace(self, informative=tuple(sorted(int(k) for k in informative)))

    def permuted(self, order):
        """Reorder latent dimensions: row k of the result is row order[k].

        `order` must be a permutation of range(K). The informative set is
        mapped through the inverse so it keeps naming the same rows.
        """
        order = [int(r) for r in order]
        if sorted(order) != list(range(self.n_latents)):
            raise ConfigError("order is not a permutation of the latent indices")
        inverse = {src: dst for dst, src in enumerate(order)}
        return replace(self, values=self.values[order], mean_kl=self.mean_kl[order],
                       informative=tuple(sorted(inverse[k] for k in self.informative)))

    def to_csv_text(self):
        cols = ["latent_index", *self.feature_names, "mean_kl"]
        with_kind = self.kind != "fvh_lt_variance"
        if with_kind:
            cols.append("kind")
        lines = [",".join(cols)]
        for k in range(self.n_latents):
            cells = [str(k)]
            cells.extend(repr(float(v)) for v in self.values[k])
            cells.append(repr(float(self.mean_kl[k])))
            if with_kind:
                cells.append(self.kind)
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def parse_csv_text(text, kind=None, informative=()):
    """Inverse of AssociationMatrix.to_csv_text.

    `kind` must be given for tables without a kind column; a kind column in
    the file wins and must be internally consistent.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError("empty association table")
    header = lines[0].split(",")
    if not header or header[0] != "latent_index":
        raise DataError("association table must start with a latent_index column")
    has_kind = header[-1] == "kind"
    tail = 2 if has_kind else 1
    if "mean_kl" not in header:
        raise DataError("association table is missing the mean_kl column")
    if header[len(header) - tail] != "mean_kl":
        raise DataError("mean_kl must be the last numeric column")
    names = tuple(header[1:len(header) - tail])

    values, kls, kinds = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataError(f"association table line {lineno}: {len(cells)} cells, expected {len(header)}")
        if int(cells[0]) != lineno - 2:
            raise DataError(f"association table line {lineno}: latent_index out of order")
        row_end = len(cells) - tail
        values.append([float(c) for c in cells[1:row_end]])
        kls.append(float(cells[row_end]))
        if has_kind:
            kinds.append(cells[-1])
    if has_kind:
        uniq = set(kinds)
        if len(uniq) > 1:
            raise DataError(f"association table mixes kinds: {sorted(uniq)}")
        kind = uniq.pop()
    elif kind is None:
        raise ConfigError("kind is required for tables without a kind column")
    return AssociationMatrix(values=np.array(values, dtype=np.float64),
                             kind=kind,
                             mean_kl=np.array(kls, dtype=np.float64),
                             feature_names=names,
                             informative=informative)
