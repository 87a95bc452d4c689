"""Experiment configuration: schema, validation, JSON round-trip.

A config fully determines an experiment: where the data comes from, the
objective and its weights, architecture knobs, probe settings, the run
count, and the master seed. Validation is collected, not fail-fast: every
bad field is named in one error so a config can be fixed in one pass.
All values survive a JSON round-trip exactly.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .datagen import PRESETS, gen_preset, load_csv, load_dataset_dir
from .errors import ConfigError
from .traversal import TraversalSpec
from .vae import CvaeSpec, ObjectiveSpec

CONFIG_FORMAT = "latentprobe-config"
CONFIG_VERSION = 1

OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class DatasetSource:
    """Exactly one of preset / csv / data_dir.

    preset: named generator (seed and optional row-count override apply);
    csv: standalone file split by a seeded permutation; data_dir: directory
    written by the generate command (manifest defines the split).
    """

    preset: str = None
    csv: str = None
    data_dir: str = None
    n: int = None
    label_column: object = None
    split_fraction: float = 0.8
    seed: int = 0

    def problems(self):
        out = []
        chosen = [x for x in (self.preset, self.csv, self.data_dir) if x is not None]
        if len(chosen) != 1:
            out.append("dataset: exactly one of preset, csv, data_dir is required")
        if self.preset is not None and self.preset not in PRESETS:
            out.append(f"dataset.preset: unknown preset {self.preset!r}, choose from {sorted(PRESETS)}")
        if self.n is not None:
            if self.preset is None:
                out.append("dataset.n: row-count override only applies to presets")
            elif not (isinstance(self.n, int) and self.n >= 0):
                out.append("dataset.n: must be a non-negative integer")
        if self.label_column is not None and self.csv is None:
            out.append("dataset.label_column: only applies to csv sources")
        if not (isinstance(self.split_fraction, float) and 0.0 < self.split_fraction <= 1.0):
            out.append("dataset.split_fraction: must be a float in (0, 1]")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            out.append("dataset.seed: must be a non-negative integer")
        return out

    def load(self):
        if self.preset is not None:
            return gen_preset(self.preset, seed=self.seed, n=self.n)
        if self.csv is not None:
            return load_csv(self.csv, label_column=self.label_column,
                            split_fraction=self.split_fraction, seed=self.seed)
        return load_dataset_dir(self.data_dir)

    def identity(self):
        """Comparable description used to refuse cross-dataset comparisons."""
        if self.preset is not None:
            return {"kind": "preset", "preset": self.preset, "seed": self.seed, "n": self.n}
        if self.csv is not None:
            return {"kind": "csv", "path": os.path.abspath(self.csv),
                    "label_column": self.label_column,
                    "split_fraction": self.split_fraction, "seed": self.seed}
        return {"kind": "dir", "path": os.path.abspath(self.data_dir)}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSource = field(default_factory=DatasetSource)
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    latent_dim: int = 5
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-4
    optimizer: str = "adam"
    dropout: float = 0.2
    disc_width: int = 256
    disc_lr: float = None
    capacity_ramp: float = 0.0
    traversal: TraversalSpec = field(default_factory=TraversalSpec)
    lambda_specific: float = 0.1
    lambda_shared: float = 0.1
    dbsr: bool = True
    rho: float = 0.5
    runs: int = 10
    master_seed: int = 0
    out_dir: str = "experiment-out"
    cvae: CvaeSpec = field(default_factory=CvaeSpec)
    jobs: int = 1

    def __post_init__(self):
        problems = list(self.dataset.problems())

        def check(cond, msg):
            if not cond:
                problems.append(msg)

        check(isinstance(self.latent_dim, int) and self.latent_dim >= 2,
              "latent_dim: must be an integer >= 2")
        check(isinstance(self.epochs, int) and self.epochs >= 0,
              "epochs: must be a non-negative integer")
        check(isinstance(self.batch_size, int) and self.batch_size >= 1,
              "batch_size: must be a positive integer")
        if isinstance(self.batch_size, int) and self.batch_size < 2 \
                and self.objective.needs_discriminator:
            problems.append("batch_size: the TC discriminator cannot permute batches "
                            "of fewer than 2 rows")
        check(isinstance(self.lr, float) and np.isfinite(self.lr) and self.lr > 0.0,
              "lr: must be a positive finite float")
        check(self.optimizer in OPTIMIZERS,
              f"optimizer: must be one of {OPTIMIZERS}")
        check(isinstance(self.dropout, float) and 0.0 <= self.dropout < 1.0,
              "dropout: must be a float in [0, 1)")
        check(isinstance(self.disc_width, int) and self.disc_width >= 1,
              "disc_width: must be a positive integer")
        check(self.disc_lr is None
              or (isinstance(self.disc_lr, float) and np.isfinite(self.disc_lr) and self.disc_lr > 0.0),
              "disc_lr: must be a positive finite float (or null for the shared lr)")
        check(isinstance(self.capacity_ramp, float) and 0.0 <= self.capacity_ramp <= 1.0,
              "capacity_ramp: must be a float in [0, 1]")
        for name in ("lambda_specific", "lambda_shared"):
            v = getattr(self, name)
            check(isinstance(v, float) and np.isfinite(v) and v >= 0.0,
                  f"{name}: must be a non-negative finite float")
        check(isinstance(self.rho, float) and np.isfinite(self.rho),
              "rho: must be a finite float")
        check(isinstance(self.runs, int) and self.runs >= 1,
              "runs: must be an integer >= 1")
        check(isinstance(self.master_seed, int) and self.master_seed >= 0,
              "master_seed: must be a non-negative integer")
        check(isinstance(self.out_dir, str) and bool(self.out_dir),
              "out_dir: must be a non-empty path")
        check(isinstance(self.jobs, int) and self.jobs >= 1,
              "jobs: must be a positive integer")
        if problems:
            raise ConfigError("invalid configuration: " + "; ".join(problems))


def _as_float(blob, key, default):
    v = blob.get(key, default)
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v


_TOP_KEYS = {
    "format", "version", "dataset", "objective", "traversal", "cvae",
    "latent_dim", "epochs", "batch_size", "lr", "optimizer", "dropout",
    "disc_width", "disc_lr", "capacity_ramp", "lambda_specific",
    "lambda_shared", "dbsr", "rho", "runs", "master_seed", "out_dir", "jobs",
}


def config_from_dict(blob):
    """Build an ExperimentConfig from parsed JSON, naming every bad key."""
    if not isinstance(blob, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = sorted(set(blob) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for section, keys in (("dataset", {"preset", "csv", "data_dir", "n", "label_column",
                                       "split_fraction", "seed"}),
                          ("objective", {"variant", "beta", "gamma", "capacity",
                                         "lambda_od", "lambda_d"}),
                          ("traversal", {"strategy", "value", "steps"}),
                          ("cvae", {"enabled", "label_column"})):
        sub = blob.get(section, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{section}: must be a JSON object")
        bad = sorted(set(sub) - keys)
        if bad:
            raise ConfigError(f"unknown {section} keys: {', '.join(bad)}")

    ds = blob.get("dataset", {})
    obj = blob.get("objective", {})
    trav = blob.get("traversal", {})
    cvae = blob.get("cvae", {})
    kwargs = {}
    for f in fields(ExperimentConfig):
        if f.name in ("dataset", "objective", "traversal", "cvae"):
            continue
        if f.name in blob:
            kwargs[f.name] = _as_float(blob, f.name, None) if f.name in (
                "lr", "dropout", "disc_lr", "capacity_ramp", "lambda_specific",
                "lambda_shared", "rho") else blob[f.name]
    try:
        dataset = DatasetSource(
            preset=ds.get("preset"), csv=ds.get("csv"), data_dir=ds.get("data_dir"),
            n=ds.get("n"), label_column=ds.get("label_column"),
            split_fraction=_as_float(ds, "split_fraction", 0.8),
            seed=ds.get("seed", 0))
        objective = ObjectiveSpec(
            variant=obj.get("variant", "bf"),
            beta=_as_float(obj, "beta", 1.0),
            gamma=_as_float(obj, "gamma", 0.0),
            capacity=_as_float(obj, "capacity", 0.0),
            lambda_od=_as_float(obj, "lambda_od", 0.0),
            lambda_d=_as_float(obj, "lambda_d", 0.0))
        traversal = TraversalSpec(
            strategy=trav.get("strategy", "fixed_range"),
            value=_as_float(trav, "value", 15.0),
            steps=trav.get("steps", 21))
        cvae_spec = CvaeSpec(enabled=bool(cvae.get("enabled", False)),
                             label_column=cvae.get("label_column"))
        return ExperimentConfig(dataset=dataset, objective=objective,
                                traversal=traversal, cvae=cvae_spec, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def config_to_dict(cfg):
    """JSON-ready dict; inverse of config_from_dict."""
    return {
        "format": CONFIG_FORMAT,
        "version": CONFIG_VERSION,
        "dataset": {k: v for k, v in asdict(cfg.dataset).items()},
        "objective": {
            "variant": cfg.objective.variant, "beta": cfg.objective.beta,
            "gamma": cfg.objective.gamma, "capacity": cfg.objective.capacity,
            "lambda_od": cfg.objective.lambda_od, "lambda_d": cfg.objective.lambda_d,
        },
        "traversal": {"strategy": cfg.traversal.strategy, "value": cfg.traversal.value,
                      "steps": cfg.traversal.steps},
        "cvae": {"enabled": cfg.cvae.enabled, "label_column": cfg.cvae.label_column},
        "latent_dim": cfg.latent_dim, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
        "lr": cfg.lr, "optimizer": cfg.optimizer, "dropout": cfg.dropout,
        "disc_width": cfg.disc_width, "disc_lr": cfg.disc_lr,
        "capacity_ramp": cfg.capacity_ramp, "lambda_specific": cfg.lambda_specific,
        "lambda_shared": cfg.lambda_shared, "dbsr": cfg.dbsr, "rho": cfg.rho,
        "runs": cfg.runs, "master_seed": cfg.master_seed, "out_dir": cfg.out_dir,
        "jobs": cfg.jobs,
    }


def load_config(path):
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if blob.get("format", CONFIG_FORMAT) != CONFIG_FORMAT:
        raise ConfigError(f"{path}: not an experiment config")
    return config_from_dict(blob)


def save_config(cfg, path):
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def override_config(cfg, **changes):
    """Functional update helper for CLI flag overrides."""
    direct = {}
    for key, value in changes.items():
        if value is None:
            continue
        direct[key] = value
    return replace(cfg, **direct) if direct else cfg
