"""Command-line entry point.

Subcommands:

    generate   write a synthetic benchmark dataset to a directory
    run        train, probe, align, and score one configured experiment
    report     render summary/CSV/SVG/JSON artifacts from a bundle
    compare    side-by-side metric table across bundles

`run` reads an optional JSON config file; every field can also be set (or
overridden) by a flag of the same name. Exit status: 0 on success, 1 on a
runtime failure, 2 on a configuration or usage error.
"""

import argparse
import json
import sys

from . import __version__
from .config import CONFIG_FORMAT, OPTIMIZERS, config_from_dict
from .datagen import PRESETS, gen_preset, write_dataset
from .errors import ConfigError, LatentprobeError
from .pipeline import run_experiment
from .report import FORMATS, compare_text, render_report
from .traversal import STRATEGIES
from .vae import VARIANTS


def _label_column(text):
    # numeric strings address columns by position, anything else by name
    try:
        return int(text)
    except ValueError:
        return text


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentprobe",
        description="Train small VAEs on tabular data and quantify how "
                    "cleanly their latent dimensions separate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset directory")
    gen.add_argument("--preset", required=True, choices=sorted(PRESETS),
                     help="named benchmark generator")
    gen.add_argument("--seed", type=int, default=0, help="generator seed")
    gen.add_argument("--n", type=int, default=None, help="override the preset row count")
    gen.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run", help="execute one experiment into a bundle directory")
    run.add_argument("--config", default=None, help="JSON experiment config file")
    ds = run.add_argument_group("dataset (exactly one source)")
    ds.add_argument("--preset", choices=sorted(PRESETS), default=None)
    ds.add_argument("--csv", default=None, help="standalone CSV file")
    ds.add_argument("--data-dir", default=None, help="directory written by generate")
    ds.add_argument("--n", type=int, default=None, help="preset row-count override")
    ds.add_argument("--label-column", type=_label_column, default=None,
                    help="label column of a CSV source (name or index)")
    ds.add_argument("--split-fraction", type=float, default=None,
                    help="training fraction for CSV sources")
    ds.add_argument("--data-seed", type=int, default=None,
                    help="seed for generation / CSV splitting")
    obj = run.add_argument_group("objective")
    obj.add_argument("--variant", choices=VARIANTS, default=None)
    obj.add_argument("--beta", type=float, default=None)
    obj.add_argument("--gamma", type=float, default=None)
    obj.add_argument("--capacity", type=float, default=None)
    obj.add_argument("--lambda-od", type=float, default=None,
                     help="off-diagonal covariance weight (dip variants)")
    obj.add_argument("--lambda-d", type=float, default=None,
                     help="diagonal covariance weight (dip variants)")
    tr = run.add_argument_group("training")
    tr.add_argument("--latent-dim", "-K", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None)
    tr.add_argument("--batch-size", type=int, default=None)
    tr.add_argument("--lr", type=float, default=None)
    tr.add_argument("--optimizer", choices=OPTIMIZERS, default=None)
    tr.add_argument("--dropout", type=float, default=None)
    tr.add_argument("--disc-width", type=int, default=None)
    tr.add_argument("--disc-lr", type=float, default=None)
    tr.add_argument("--capacity-ramp", type=float, default=None,
                    help="fraction of epochs over which the KL target ramps up")
    tr.add_argument("--runs", "-R", type=int, default=None)
    tr.add_argument("--master-seed", type=int, default=None)
    tr.add_argument("--jobs", type=int, default=None, help="parallel training workers")
    pr = run.add_argument_group("probes")
    pr.add_argument("--traversal-strategy", choices=STRATEGIES, default=None)
    pr.add_argument("--traversal-value", type=float, default=None)
    pr.add_argument("--traversal-steps", type=int, default=None)
    pr.add_argument("--lambda-specific", type=float, default=None)
    pr.add_argument("--lambda-shared", type=float, default=None)
    pr.add_argument("--no-dbsr", dest="dbsr", action="store_const", const=False,
                    default=None, help="skip the sparse-regression probe")
    pr.add_argument("--rho", type=float, default=None,
                    help="correlation threshold for cross-run alignment")
    pr.add_argument("--cvae", action="store_const", const=True, default=None,
                    help="condition encoder and decoder on the label column")
    pr.add_argument("--cvae-label-column", type=_label_column, default=None)
    run.add_argument("--out", "-o", dest="out_dir", default=None, help="bundle directory")
    run.add_argument("--quiet", action="store_true", help="suppress progress lines")

    rep = sub.add_parser("report", help="render artifacts from a bundle")
    rep.add_argument("bundle", help="bundle directory written by run")
    rep.add_argument("--format", choices=FORMATS, default="all")

    cmp_ = sub.add_parser("compare", help="compare metrics across bundles")
    cmp_.add_argument("bundles", nargs="+", help="bundle directories")
    cmp_.add_argument("--out", default=None, help="also write the table to this file")
    return parser


def _load_blob(path):
    try:
        with open(path) as fh:
            blob = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(blob, dict):
        raise ConfigError(f"{path}: config root must be a JSON object")
    if blob.get("format", CONFIG_FORMAT) != CONFIG_FORMAT:
        raise ConfigError(f"{path}: not an experiment config")
    return blob


def _config_from_args(args):
    blob = _load_blob(args.config) if args.config else {}

    def put(section, key, value):
        if value is not None:
            blob.setdefault(section, {})[key] = value

    if any(v is not None for v in (args.preset, args.csv, args.data_dir)):
        # a source flag replaces whatever source the file named
        for key in ("preset", "csv", "data_dir"):
            blob.get("dataset", {}).pop(key, None)
    put("dataset", "preset", args.preset)
    put("dataset", "csv", args.csv)
    put("dataset", "data_dir", args.data_dir)
    put("dataset", "n", args.n)
    put("dataset", "label_column", args.label_column)
    put("dataset", "split_fraction", args.split_fraction)
    put("dataset", "seed", args.data_seed)
    put("objective", "variant", args.variant)
    put("objective", "beta", args.beta)
    put("objective", "gamma", args.gamma)
    put("objective", "capacity", args.capacity)
    put("objective", "lambda_od", args.lambda_od)
    put("objective", "lambda_d", args.lambda_d)
    put("traversal", "strategy", args.traversal_strategy)
    put("traversal", "value", args.traversal_value)
    put("traversal", "steps", args.traversal_steps)
    put("cvae", "enabled", args.cvae)
    put("cvae", "label_column", args.cvae_label_column)
    for key in ("latent_dim", "epochs", "batch_size", "lr", "optimizer", "dropout",
                "disc_width", "disc_lr", "capacity_ramp", "lambda_specific",
                "lambda_shared", "dbsr", "rho", "runs", "master_seed", "out_dir",
                "jobs"):
        value = getattr(args, key)
        if value is not None:
            blob[key] = value
    blob.pop("format", None)
    blob.pop("version", None)
    return config_from_dict(blob)


def _cmd_generate(args):
    dataset = gen_preset(args.preset, seed=args.seed, n=args.n)
    write_dataset(dataset, args.out, preset_name=args.preset, seed=args.seed)
    n, p = dataset.x.shape
    print(f"wrote {args.preset} dataset ({n} rows, {p} features) to {args.out}")
    return 0


def _cmd_run(args):
    config = _config_from_args(args)
    log = (lambda msg: None) if args.quiet else print
    run_experiment(config, log=log)
    return 0


def _cmd_report(args):
    written = render_report(args.bundle, args.format)
    for path in written:
        print(path)
    return 0


def _cmd_compare(args):
    table = compare_text(args.bundles)
    print(table, end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"generate": _cmd_generate, "run": _cmd_run,
                "report": _cmd_report, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LatentprobeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
