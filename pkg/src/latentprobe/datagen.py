"""Synthetic block-factor datasets, CSV ingestion, and standardization.

The generator draws x = loadings @ factors + noise with a block-structured
loading matrix: each latent factor feeds a disjoint set of feature columns.
That block map is kept as ground truth so downstream probes can be scored
against it. Standardization statistics always come from the training split
only and are recorded so values can be mapped back to original units.
"""

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError

MANIFEST_FORMAT = "latentprobe-dataset"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class FactorGroundTruth:
    """Block map from generative factors to feature columns.

    `blocks[f]` lists the feature indices loaded by factor f; blocks are
    disjoint. `loadings` is p-by-m with loadings[j, f] nonzero exactly when
    feature j belongs to block f. For labeled datasets, `label_features`
    names the standardized feature columns the label is built from.
    """

    blocks: tuple
    loadings: np.ndarray
    noise_std: float
    label_features: tuple = None
    label_noise: float = 0.0

    @property
    def n_factors(self):
        return len(self.blocks)


@dataclass(frozen=True)
class Standardization:
    """Per-column training-split mean/std, plus the label's when present."""

    mean: np.ndarray
    std: np.ndarray
    label_mean: float = None
    label_std: float = None

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def invert(self, x_std):
        return np.asarray(x_std, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class TabularDataset:
    """Standardized feature matrix with split indices and optional extras."""

    x: np.ndarray
    feature_names: tuple
    train_idx: np.ndarray
    test_idx: np.ndarray
    standardization: Standardization
    y: np.ndarray = None
    ground_truth: FactorGroundTruth = None
    source: str = "memory"
    # raw-unit copies kept so that writing a dataset out reproduces the
    # original bytes instead of a round-tripped approximation
    x_raw: np.ndarray = None
    y_raw: np.ndarray = None

    @property
    def n_features(self):
        return self.x.shape[1]

    @property
    def train_x(self):
        return self.x[self.train_idx]

    @property
    def train_y(self):
        return None if self.y is None else self.y[self.train_idx]

    @property
    def test_x(self):
        return self.x[self.test_idx]


def _standardize_columns(x_raw, train_idx, names):
    if len(train_idx) == 0:
        return Standardization(mean=np.zeros(x_raw.shape[1]), std=np.ones(x_raw.shape[1]))
    train = x_raw[train_idx]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    dead = np.nonzero(std == 0.0)[0]
    if dead.size:
        bad = ", ".join(names[j] for j in dead)
        raise DataError(f"zero standard deviation in training split for column(s): {bad}")
    return Standardization(mean=mean, std=std)


def gen_fa(n, p, blocks, loading_range=(0.5, 1.5), noise_std=0.1, seed=0,
           train_fraction=0.8, label_features=None, label_noise=0.1,
           feature_names=None):
    """Generate a block-factor dataset; deterministic per seed.

    Factors are standard normal; nonzero loadings are drawn uniformly from
    `loading_range` with random sign; feature noise is N(0, noise_std^2).
    Rows are split contiguously (first `train_fraction` of rows train).
    When `label_features` names two feature indices, a label column is
    produced as the sum of those standardized features plus
    N(0, label_noise^2) noise, itself standardized from the training split.
    """
    blocks = tuple(tuple(int(j) for j in b) for b in blocks)
    flat = [j for b in blocks for j in b]
    if len(set(flat)) != len(flat):
        raise ConfigError("factor blocks overlap")
    if flat and (min(flat) < 0 or max(flat) >= p):
        raise ConfigError("block feature index out of range")
    if len(flat) > p:
        raise ConfigError("blocks name more features than exist")

    rng = np.random.default_rng(seed)
    m = len(blocks)
    loadings = np.zeros((p, m))
    for f, block in enumerate(blocks):
        for j in block:
            mag = rng.uniform(loading_range[0], loading_range[1])
            sign = 1.0 if rng.random() < 0.5 else -1.0
            loadings[j, f] = sign * mag
    factors = rng.standard_normal((n, m))
    noise = rng.standard_normal((n, p)) * noise_std
    x_raw = factors @ loadings.T + noise

    if feature_names is None:
        width = max(2, len(str(p)))
        feature_names = tuple(f"f{j + 1:0{width}d}" for j in range(p))
    else:
        feature_names = tuple(feature_names)

    n_train = int(round(n * train_fraction))
    train_idx = np.arange(n_train)
    test_idx = np.arange(n_train, n)
    stdz = _standardize_columns(x_raw, train_idx, feature_names)
    x = stdz.apply(x_raw) if n else x_raw.copy()

    y = None
    y_raw = None
    truth_label = None
    if label_features is not None:
        if len(label_features) != 2:
            raise ConfigError("label_features must name exactly two columns")
        truth_label = tuple(int(j) for j in label_features)
        y_raw = x[:, truth_label[0]] + x[:, truth_label[1]]
        y_raw = y_raw + rng.standard_normal(n) * label_noise
        if n_train:
            y_mean = float(y_raw[train_idx].mean())
            y_std = float(y_raw[train_idx].std())
            if y_std == 0.0:
                raise DataError("zero standard deviation in training-split label")
        else:
            y_mean, y_std = 0.0, 1.0
        y = (y_raw - y_mean) / y_std
        stdz = replace(stdz, label_mean=y_mean, label_std=y_std)

    truth = FactorGroundTruth(blocks=blocks, loadings=loadings, noise_std=float(noise_std),
                              label_features=truth_label,
                              label_noise=float(label_noise) if truth_label else 0.0)
    return TabularDataset(x=x, feature_names=feature_names, train_idx=train_idx,
                          test_idx=test_idx, standardization=stdz, y=y,
                          ground_truth=truth, source=f"gen(seed={seed})",
                          x_raw=x_raw, y_raw=y_raw)


def _even_blocks(p, m):
    sizes = [p // m + (1 if i < p % m else 0) for i in range(m)]
    out, start = [], 0
    for s in sizes:
        out.append(tuple(range(start, start + s)))
        start += s
    return tuple(out)


PRESETS = {
    "fa15": dict(n=1000, p=15, blocks=((0, 1, 2, 3), (4, 5, 6, 7), (8, 9, 10, 11), (12, 13, 14))),
    "fa24": dict(n=10_000, p=24, blocks=_even_blocks(24, 6)),
    "fa100": dict(n=50_000, p=100, blocks=_even_blocks(100, 6)),
    "fa10y": dict(n=2000, p=10, blocks=tuple((j,) for j in range(10)), label_features=(3, 7)),
}


def preset(name, n=None):
    """Generator keyword arguments for a named preset; `n` overrides size."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = dict(PRESETS[name])
    if n is not None:
        if n < 0:
            raise ConfigError("n must be non-negative")
        cfg["n"] = int(n)
    return cfg


def gen_preset(name, seed=0, n=None):
    return gen_fa(seed=seed, **preset(name, n=n))


# ---------------------------------------------------------------------------
# CSV and manifest I/O

def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno} has {len(row)} cells, header has {len(header)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    return header, data


def load_csv(path, label_column=None, split_fraction=0.8, seed=0):
    """Parse a headered numeric CSV into a standardized TabularDataset.

    Rows are split train/test by a seeded permutation. `label_column` may be
    a header name or column index; that column becomes the label and is
    excluded from the feature matrix.
    """
    header, data = _read_csv(path)

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str):
            if label_column not in header:
                raise DataError(f"{path}: no column named {label_column!r}")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column)
            if not 0 <= label_idx < len(header):
                raise DataError(f"{path}: label column index {label_idx} out of range")
    feat_cols = [j for j in range(len(header)) if j != label_idx]
    names = tuple(header[j] for j in feat_cols)
    x_raw = data[:, feat_cols]
    y_raw = data[:, label_idx] if label_idx is not None else None

    n = x_raw.shape[0]
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * split_fraction))
    train_idx, test_idx = order[:n_train], order[n_train:]

    stdz = _standardize_columns(x_raw, train_idx, names)
    x = stdz.apply(x_raw) if n else x_raw.copy()
    y = None
    if y_raw is not None:
        if n_train:
            y_mean, y_std = float(y_raw[train_idx].mean()), float(y_raw[train_idx].std())
            if y_std == 0.0:
                raise DataError(f"{path}: zero standard deviation in training-split label")
        else:
            y_mean, y_std = 0.0, 1.0
        y = (y_raw - y_mean) / y_std
        stdz = replace(stdz, label_mean=y_mean, label_std=y_std)
    return TabularDataset(x=x, feature_names=names, train_idx=train_idx, test_idx=test_idx,
                          standardization=stdz, y=y, ground_truth=None, source=str(path),
                          x_raw=x_raw, y_raw=y_raw)


def write_dataset(dataset, out_dir, preset_name=None, seed=None):
    """Write raw-unit data.csv plus manifest.json describing the dataset."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    raw = dataset.x_raw
    if raw is None:
        raw = dataset.standardization.invert(dataset.x)
    has_label = dataset.y is not None
    lines = [",".join(dataset.feature_names + (("label",) if has_label else ()))]
    if has_label:
        y_raw = dataset.y_raw
        if y_raw is None:
            y_raw = dataset.y * dataset.standardization.label_std + dataset.standardization.label_mean
    for i in range(raw.shape[0]):
        cells = [repr(float(v)) for v in raw[i]]
        if has_label:
            cells.append(repr(float(y_raw[i])))
        lines.append(",".join(cells))
    csv_path = os.path.join(out_dir, "data.csv")
    _atomic_write(csv_path, "\n".join(lines) + "\n")

    truth = dataset.ground_truth
    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "preset": preset_name,
        "seed": seed,
        "n": int(dataset.x.shape[0]),
        "p": int(dataset.n_features),
        "feature_names": list(dataset.feature_names),
        "train_rows": int(len(dataset.train_idx)),
        "split": "contiguous",
        "label": None,
        "ground_truth": None,
    }
    if truth is not None:
        manifest["ground_truth"] = {
            "blocks": [list(b) for b in truth.blocks],
            "loadings": truth.loadings.tolist(),
            "noise_std": truth.noise_std,
        }
        if truth.label_features is not None:
            manifest["label"] = {"features": list(truth.label_features),
                                 "noise": truth.label_noise}
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path


def load_dataset_dir(path):
    """Load a directory written by write_dataset (CSV + manifest)."""
    import os

    man_path = os.path.join(path, "manifest.json")
    if not os.path.exists(man_path):
        raise DataError(f"{path}: missing manifest.json")
    with open(man_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataError(f"{man_path}: not a dataset manifest")

    has_label = manifest.get("label") is not None
    header, data = _read_csv(os.path.join(path, "data.csv"))
    names = tuple(manifest["feature_names"])
    expected = list(names) + (["label"] if has_label else [])
    if header != expected:
        raise DataError(f"{path}: data.csv header does not match manifest feature names")
    n = manifest["n"]
    n_train = manifest["train_rows"]
    train_idx = np.arange(n_train)
    test_idx = np.arange(n_train, n)
    if data.shape[0] != n:
        raise DataError(f"{path}: manifest says {n} rows, data.csv has {data.shape[0]}")

    # Standardize raw values directly against the manifest's contiguous split.
    raw = data[:, :len(names)]
    stdz = _standardize_columns(raw, train_idx, names)
    x = stdz.apply(raw) if n else raw.copy()
    y = None
    y_raw = None
    if has_label:
        y_raw = data[:, len(names)]
        if n_train:
            y_mean, y_std = float(y_raw[train_idx].mean()), float(y_raw[train_idx].std())
            if y_std == 0.0:
                raise DataError(f"{path}: zero standard deviation in training-split label")
        else:
            y_mean, y_std = 0.0, 1.0
        y = (y_raw - y_mean) / y_std
        stdz = replace(stdz, label_mean=y_mean, label_std=y_std)

    truth = None
    gt = manifest.get("ground_truth")
    if gt is not None:
        label = manifest.get("label") or {}
        truth = FactorGroundTruth(
            blocks=tuple(tuple(b) for b in gt["blocks"]),
            loadings=np.array(gt["loadings"], dtype=np.float64),
            noise_std=float(gt["noise_std"]),
            label_features=tuple(label["features"]) if label else None,
            label_noise=float(label.get("noise", 0.0)) if label else 0.0,
        )
    return TabularDataset(x=x, feature_names=names, train_idx=train_idx, test_idx=test_idx,
                          standardization=stdz, y=y, ground_truth=truth, source=str(path),
                          x_raw=raw, y_raw=y_raw)


def dataset_identity(dataset, manifest_hint=None):
    """Stable identifier used to refuse cross-dataset comparisons."""
    h = np.float64(dataset.x.sum() if dataset.x.size else 0.0)
    return {
        "source": manifest_hint or dataset.source,
        "n": int(dataset.x.shape[0]),
        "p": int(dataset.n_features),
        "checksum": repr(float(h)),
    }


def _atomic_write(path, text):
    import os

    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
