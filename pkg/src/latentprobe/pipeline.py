"""End-to-end experiment runner and the on-disk bundle it produces.

A bundle directory is self-describing and byte-deterministic apart from
timings:

    config.json           resolved experiment configuration
    dataset.json          identity and shape of the data used
    runs/rNN/             per-run checkpoint plus per-run probe tables
    alignment.json        cross-run mappings, one per probe
    aggregate/*.csv       aligned element-wise mean matrices
    metrics.json          scores, informative sets, discovery accounting
    timings.json          wall-clock per stage (excluded from determinism)
    error.json            first failed stage, when a run aborts

Re-running the same config overwrites the bundle with identical bytes,
timings aside; that property is what makes results replayable instead of
cherry-pickable.
"""

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .align import greedy_align, split_informative
from .assoc import AssociationMatrix, parse_csv_text
from .config import ExperimentConfig, load_config, save_config
from .datagen import dataset_identity
from .dbsr import dbsr_ls
from .errors import BundleError, ConfigError, LatentprobeError
from .metrics import higgins_score, informative_fdr, lsdi
from .traversal import cvae_quality_traversal, fvh_lt_aggregate, fvh_lt_run
from .vae import load_checkpoint, save_checkpoint, train_vae

HIGGINS_STREAM = 101


def _write_json(path, blob, compact=False):
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        if compact:
            json.dump(blob, fh, sort_keys=True, separators=(",", ":"))
        else:
            json.dump(blob, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _write_text(path, text):
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _run_dir(out_dir, r, runs):
    width = max(2, len(str(runs)))
    return os.path.join(out_dir, "runs", f"r{r:0{width}d}")


def _train_one(args):
    config, dataset, run_seed = args
    return train_vae(config, dataset, seed=run_seed)


def _label_traversal_csv(feature_names, rows, mean_row):
    lines = [",".join(("run", *feature_names))]
    for r, row in enumerate(rows, start=1):
        lines.append(",".join([str(r)] + [repr(float(v)) for v in row]))
    lines.append(",".join(["mean"] + [repr(float(v)) for v in mean_row]))
    return "\n".join(lines) + "\n"


def _parse_label_traversal_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    names = tuple(header[1:])
    mean_row = None
    for line in lines[1:]:
        cells = line.split(",")
        if cells[0] == "mean":
            mean_row = np.array([float(c) for c in cells[1:]])
    if mean_row is None:
        raise BundleError("label traversal table has no mean row")
    return names, mean_row


@dataclass
class RunBundle:
    """Loaded view of a bundle directory."""

    path: str
    config: ExperimentConfig
    dataset_info: dict
    metrics: dict = None
    aggregates: dict = None
    label_traversal: np.ndarray = None
    error: dict = None

    @property
    def failed(self):
        return self.error is not None


def run_experiment(config, log=None):
    """Execute one configured experiment and write its bundle.

    Stages run in order: dataset load, R training runs, traversal probe,
    regression probe, alignment and aggregation, metrics. The first
    failing stage is recorded in error.json (everything already written
    stays on disk) and the exception propagates.
    """
    say = log if log is not None else (lambda msg: None)
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    stale_error = os.path.join(out, "error.json")
    if os.path.exists(stale_error):
        os.remove(stale_error)
    save_config(config, os.path.join(out, "config.json"))

    timings = {}
    stage = "load-dataset"
    try:
        t0 = time.perf_counter()
        dataset = config.dataset.load()
        if config.cvae.enabled and dataset.y is None:
            raise ConfigError("cvae.enabled: dataset has no label column")
        info = {
            "identity": config.dataset.identity(),
            "checksum": dataset_identity(dataset)["checksum"],
            "n": int(dataset.x.shape[0]),
            "p": int(dataset.n_features),
            "train_rows": int(len(dataset.train_idx)),
            "feature_names": list(dataset.feature_names),
            "has_label": dataset.y is not None,
            "has_ground_truth": dataset.ground_truth is not None,
        }
        _write_json(os.path.join(out, "dataset.json"), info)
        timings[stage] = time.perf_counter() - t0

        stage = "train"
        t0 = time.perf_counter()
        seeds = [config.master_seed + r for r in range(1, config.runs + 1)]
        say(f"training {config.runs} run(s), variant {config.objective.variant!r}")
        if config.jobs > 1 and config.runs > 1:
            with ProcessPoolExecutor(max_workers=min(config.jobs, config.runs)) as pool:
                models = list(pool.map(_train_one, [(config, dataset, s) for s in seeds]))
        else:
            models = [train_vae(config, dataset, seed=s) for s in seeds]
        for r, model in enumerate(models, start=1):
            rdir = _run_dir(out, r, config.runs)
            os.makedirs(rdir, exist_ok=True)
            save_checkpoint(model, os.path.join(rdir, "checkpoint.json"))
        timings[stage] = time.perf_counter() - t0

        stage = "traversal"
        t0 = time.perf_counter()
        say("running latent traversals")
        fvh_runs = []
        for r, model in enumerate(models, start=1):
            mat = fvh_lt_run(model, dataset, config.traversal)
            fvh_runs.append(mat)
            _write_text(os.path.join(_run_dir(out, r, config.runs), "fvh_lt.csv"),
                        mat.to_csv_text())
        timings[stage] = time.perf_counter() - t0

        stage = "regression"
        dbsr_result = None
        if config.dbsr:
            t0 = time.perf_counter()
            say("running sparse regression")
            dbsr_result = dbsr_ls(models, dataset, config.lambda_specific,
                                  config.lambda_shared, rho=config.rho,
                                  seed=config.master_seed)
            for r in range(1, config.runs + 1):
                rdir = _run_dir(out, r, config.runs)
                _write_text(os.path.join(rdir, "dbsr_magnitude.csv"),
                            dbsr_result.per_run_magnitude[r - 1].to_csv_text())
                _write_text(os.path.join(rdir, "dbsr_signed.csv"),
                            dbsr_result.per_run_signed[r - 1].to_csv_text())
            timings[stage] = time.perf_counter() - t0

        stage = "align"
        t0 = time.perf_counter()
        mapping = greedy_align(fvh_runs, rho=config.rho, seed=config.master_seed)
        fvh_agg = fvh_lt_aggregate(fvh_runs, mapping)
        alignment_blob = {"fvh_lt": mapping.to_json_dict()}
        if dbsr_result is not None:
            alignment_blob["dbsr"] = dbsr_result.mapping.to_json_dict()
        _write_json(os.path.join(out, "alignment.json"), alignment_blob)
        agg_dir = os.path.join(out, "aggregate")
        os.makedirs(agg_dir, exist_ok=True)
        _write_text(os.path.join(agg_dir, "fvh_lt.csv"), fvh_agg.to_csv_text())
        if dbsr_result is not None:
            _write_text(os.path.join(agg_dir, "dbsr_magnitude.csv"),
                        dbsr_result.magnitude.to_csv_text())
            _write_text(os.path.join(agg_dir, "dbsr_signed.csv"),
                        dbsr_result.signed.to_csv_text())
        timings[stage] = time.perf_counter() - t0

        stage = "label-traversal"
        label_rows = None
        label_mean = None
        if config.cvae.enabled:
            t0 = time.perf_counter()
            label_rows = [cvae_quality_traversal(m, dataset, config.traversal) for m in models]
            label_mean = np.mean(label_rows, axis=0)
            _write_text(os.path.join(agg_dir, "label_traversal.csv"),
                        _label_traversal_csv(dataset.feature_names, label_rows, label_mean))
            timings[stage] = time.perf_counter() - t0

        stage = "metrics"
        t0 = time.perf_counter()
        say("computing metrics")
        metrics = _build_metrics(config, dataset, models, fvh_runs, fvh_agg,
                                 dbsr_result, mapping, label_mean)
        _write_json(os.path.join(out, "metrics.json"), metrics)
        timings[stage] = time.perf_counter() - t0
    except Exception as exc:
        _write_json(os.path.join(out, "error.json"),
                    {"stage": stage, "error": type(exc).__name__, "message": str(exc)})
        _write_json(os.path.join(out, "timings.json"), timings)
        raise
    timings["total"] = float(sum(timings.values()))
    _write_json(os.path.join(out, "timings.json"), timings)
    say(f"bundle written to {out}")
    return RunBundle(path=out, config=config, dataset_info=info, metrics=metrics,
                     aggregates=_collect_aggregates(fvh_agg, dbsr_result),
                     label_traversal=label_mean, error=None)


def _collect_aggregates(fvh_agg, dbsr_result):
    out = {"fvh_lt": fvh_agg}
    if dbsr_result is not None:
        out["dbsr_magnitude"] = dbsr_result.magnitude
        out["dbsr_signed"] = dbsr_result.signed
    return out


def _lsdi_blob(matrix):
    rep = lsdi(matrix)
    return {"value": rep.value, "degenerate_case": rep.degenerate_case}


def _fdr_blob(matrix, truth):
    rep = informative_fdr(matrix, truth)
    return {"fdr": rep.fdr, "recall": rep.recall,
            "assignment": [[int(d), int(f), bool(t)] for d, f, t in rep.assignment]}


def _build_metrics(config, dataset, models, fvh_runs, fvh_agg, dbsr_result,
                   mapping, label_mean):
    per_run = []
    for r, (model, mat) in enumerate(zip(models, fvh_runs), start=1):
        split = split_informative(mat.mean_kl)
        per_run.append({
            "run": r,
            "seed": model.seed,
            "collapsed": model.collapsed,
            "final_loss": model.loss_trace[-1] if model.loss_trace else None,
            "informative_fvh_lt": list(split.informative),
            "mean_kl": [float(v) for v in mat.mean_kl],
        })

    aggregate = {
        "fvh_lt": {
            "informative": list(fvh_agg.informative),
            "mean_kl": [float(v) for v in fvh_agg.mean_kl],
            "lsdi": _lsdi_blob(fvh_agg),
        },
    }
    if dbsr_result is not None:
        aggregate["dbsr_magnitude"] = {
            "informative": list(dbsr_result.magnitude.informative),
            "mean_kl": [float(v) for v in dbsr_result.magnitude.mean_kl],
            "lsdi": _lsdi_blob(dbsr_result.magnitude),
        }

    truth = dataset.ground_truth
    fdr = None
    higgins = None
    if truth is not None:
        fdr = {"fvh_lt": _fdr_blob(fvh_agg, truth)}
        if dbsr_result is not None:
            fdr["dbsr_magnitude"] = _fdr_blob(dbsr_result.magnitude, truth)
        rng = np.random.default_rng(np.random.SeedSequence((config.master_seed, HIGGINS_STREAM)))
        score = higgins_score(dataset, models[0], rng=rng)
        higgins = {"accuracy": score.accuracy, "chance": score.chance,
                   "train_votes": score.train_votes, "test_votes": score.test_votes}

    label_blob = None
    if label_mean is not None:
        order = np.argsort(-label_mean, kind="stable")
        label_blob = {
            "variance": [float(v) for v in label_mean],
            "top_features": [dataset.feature_names[int(j)] for j in order[:2]],
            "top_feature_indices": [int(j) for j in order[:2]],
        }

    return {
        "experiment": {
            "variant": config.objective.variant,
            "latent_dim": config.latent_dim,
            "runs": config.runs,
            "master_seed": config.master_seed,
            "dataset": config.dataset.identity(),
        },
        "alignment": {"fvh_lt_reference_run": mapping.reference_run + 1},
        "per_run": per_run,
        "aggregate": aggregate,
        "fdr": fdr,
        "higgins": higgins,
        "label_traversal": label_blob,
    }


# ---------------------------------------------------------------------------
# loading bundles back

def _read_json(path, required, what):
    if not os.path.exists(path):
        if required:
            raise BundleError(f"{path}: missing {what}; not a run bundle?")
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise BundleError(f"{path}: corrupt {what} ({exc})") from None


def load_bundle(path):
    """Read a bundle directory; raises BundleError when core pieces are
    missing or unreadable. Partial bundles (failed runs) load with whatever
    stages completed."""
    if not os.path.isdir(path):
        raise BundleError(f"{path}: not a directory")
    cfg_path = os.path.join(path, "config.json")
    if not os.path.exists(cfg_path):
        raise BundleError(f"{path}: missing config.json; not a run bundle?")
    try:
        config = load_config(cfg_path)
    except ConfigError as exc:
        raise BundleError(f"{path}: corrupt config.json ({exc})") from None
    info = _read_json(os.path.join(path, "dataset.json"), required=False, what="dataset record")
    metrics = _read_json(os.path.join(path, "metrics.json"), required=False, what="metrics")
    error = _read_json(os.path.join(path, "error.json"), required=False, what="error record")

    aggregates = {}
    agg_meta = (metrics or {}).get("aggregate") or {}
    for kind_key, fname, kind in (("fvh_lt", "fvh_lt.csv", "fvh_lt_variance"),
                                  ("dbsr_magnitude", "dbsr_magnitude.csv", None),
                                  ("dbsr_signed", "dbsr_signed.csv", None)):
        fpath = os.path.join(path, "aggregate", fname)
        if not os.path.exists(fpath):
            continue
        with open(fpath) as fh:
            try:
                mat = parse_csv_text(fh.read(), kind=kind)
            except LatentprobeError as exc:
                raise BundleError(f"{fpath}: corrupt aggregate table ({exc})") from None
        meta = agg_meta.get(kind_key)
        if meta and meta.get("informative") is not None:
            mat = mat.with_informative(meta["informative"])
        aggregates[kind_key] = mat

    label_mean = None
    lpath = os.path.join(path, "aggregate", "label_traversal.csv")
    if os.path.exists(lpath):
        with open(lpath) as fh:
            _, label_mean = _parse_label_traversal_csv(fh.read())
    return RunBundle(path=path, config=config, dataset_info=info, metrics=metrics,
                     aggregates=aggregates, label_traversal=label_mean, error=error)


def load_run_model(bundle_path, run_index, runs=None):
    """Reload one run's checkpoint from a bundle."""
    if runs is None:
        cfg = load_config(os.path.join(bundle_path, "config.json"))
        runs = cfg.runs
    ck = os.path.join(_run_dir(bundle_path, run_index, runs), "checkpoint.json")
    if not os.path.exists(ck):
        raise BundleError(f"{ck}: missing checkpoint")
    return load_checkpoint(ck)
