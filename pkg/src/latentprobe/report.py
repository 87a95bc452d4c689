"""Rendering of run bundles: grayscale SVG heatmaps, plain-text summary
tables, and side-by-side comparisons across bundles.

Everything here is a pure function of bundle contents, so regenerating a
report overwrites it with identical bytes.
"""

import os

import numpy as np

from .errors import BundleError
from .pipeline import RunBundle, _write_json, _write_text, load_bundle

CELL_H = 22
LEFT_MARGIN = 120
TOP_MARGIN = 78
FONT = "font-family=\"monospace\""


def _cell_width(n_features):
    if n_features <= 30:
        return 24
    return max(7, 720 // n_features)


def _gray(value, vmax):
    # darker = larger; an all-zero matrix renders uniformly white
    if vmax <= 0.0:
        level = 0.0
    else:
        level = min(1.0, max(0.0, value / vmax))
    g = 255 - int(round(255 * level))
    return f"#{g:02x}{g:02x}{g:02x}"


def heatmap_svg(matrix, title, extra_row=None, extra_label="label"):
    """Grayscale heatmap of an association matrix.

    Latent rows are sorted by mean KL descending; shading is normalized by
    the matrix-wide maximum of the magnitudes, so relative structure is
    visible at any scale while the CSVs keep the raw values. An optional
    extra row (e.g. label-traversal variance) joins the normalization.
    """
    values = np.abs(np.asarray(matrix.values, dtype=float))
    k_count, p = values.shape
    order = np.argsort(-np.asarray(matrix.mean_kl), kind="stable")
    rows = [(int(k), values[int(k)]) for k in order]
    display = [(f"z{k:02d} kl={matrix.mean_kl[k]:.3g}"
                + (" *" if k in matrix.informative else ""), row)
               for k, row in rows]
    if extra_row is not None:
        display.append((extra_label, np.abs(np.asarray(extra_row, dtype=float))))
    vmax = max((float(row.max()) for _, row in display if row.size), default=0.0)

    cw = _cell_width(p)
    width = LEFT_MARGIN + cw * p + 20
    height = TOP_MARGIN + CELL_H * len(display) + 30
    out = [f"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\">",
           f"<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>",
           f"<text x=\"{LEFT_MARGIN}\" y=\"18\" {FONT} font-size=\"13\">{title}</text>"]
    col_step = max(1, -(-p // 40))
    for j in range(0, p, col_step):
        x = LEFT_MARGIN + j * cw + cw // 2
        out.append(f"<text x=\"{x}\" y=\"{TOP_MARGIN - 6}\" {FONT} font-size=\"9\" "
                   f"transform=\"rotate(-60 {x} {TOP_MARGIN - 6})\">"
                   f"{matrix.feature_names[j]}</text>")
    for r, (label, row) in enumerate(display):
        y = TOP_MARGIN + r * CELL_H
        out.append(f"<text x=\"4\" y=\"{y + 15}\" {FONT} font-size=\"10\">{label}</text>")
        for j in range(p):
            out.append(f"<rect x=\"{LEFT_MARGIN + j * cw}\" y=\"{y}\" width=\"{cw}\" "
                       f"height=\"{CELL_H}\" fill=\"{_gray(float(row[j]), vmax)}\" "
                       f"stroke=\"#dddddd\" stroke-width=\"1\"/>")
    legend_y = TOP_MARGIN + len(display) * CELL_H + 18
    out.append(f"<text x=\"{LEFT_MARGIN}\" y=\"{legend_y}\" {FONT} font-size=\"10\">"
               f"darker = stronger association; max = {vmax:.6g}; "
               f"* = informative</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _metric_row(bundle):
    """Flat per-bundle metric summary used by both summary and compare."""
    m = bundle.metrics or {}
    agg = m.get("aggregate") or {}
    fvh = agg.get("fvh_lt") or {}
    dbsr = agg.get("dbsr_magnitude") or {}
    fdr = m.get("fdr") or {}
    hig = m.get("higgins") or {}
    per_run = m.get("per_run") or []
    return {
        "variant": (m.get("experiment") or {}).get("variant",
                                                   bundle.config.objective.variant),
        "lsdi_traversal": (fvh.get("lsdi") or {}).get("value"),
        "lsdi_regression": (dbsr.get("lsdi") or {}).get("value"),
        "higgins": hig.get("accuracy"),
        "fdr": (fdr.get("fvh_lt") or {}).get("fdr"),
        "recall": (fdr.get("fvh_lt") or {}).get("recall"),
        "informative": len(fvh.get("informative", [])) if fvh else None,
        "collapsed": sum(1 for r in per_run if r.get("collapsed")) if per_run else None,
    }


_TABLE_COLS = (("lsdi_traversal", "lsdi_trav"), ("lsdi_regression", "lsdi_regr"),
               ("higgins", "higgins"), ("fdr", "fdr"), ("recall", "recall"),
               ("informative", "n_info"), ("collapsed", "collapsed"))


def _table(rows, labels):
    head = "objective".ljust(14) + "".join(h.rjust(11) for _, h in _TABLE_COLS)
    lines = [head, "-" * len(head)]
    for label, row in zip(labels, rows):
        cells = []
        for key, _ in _TABLE_COLS:
            v = row[key]
            if v is None:
                cells.append("-".rjust(11))
            elif isinstance(v, int):
                cells.append(str(v).rjust(11))
            else:
                cells.append(f"{v:.4f}".rjust(11))
        lines.append(label.ljust(14) + "".join(cells))
    return "\n".join(lines)


def summary_text(bundle):
    """Plain-text report for one bundle."""
    cfg = bundle.config
    info = bundle.dataset_info or {}
    lines = ["experiment summary", "==================",
             f"bundle: {bundle.path}",
             f"dataset: {info.get('identity') or cfg.dataset.identity()}",
             f"shape: n={info.get('n')} p={info.get('p')} train_rows={info.get('train_rows')}",
             f"objective: {cfg.objective.variant}  latent_dim={cfg.latent_dim}  "
             f"runs={cfg.runs}  master_seed={cfg.master_seed}",
             ""]
    if bundle.error is not None:
        lines.append(f"status: FAILED at stage {bundle.error.get('stage')!r}: "
                     f"{bundle.error.get('message')}")
        lines.append("")
    row = _metric_row(bundle)
    lines.append(_table([row], [row["variant"]]))
    lines.append("")

    m = bundle.metrics or {}
    agg = m.get("aggregate") or {}
    for key, name in (("fvh_lt", "traversal variance"), ("dbsr_magnitude", "regression magnitude")):
        blob = agg.get(key)
        if not blob:
            continue
        lsdi = blob.get("lsdi") or {}
        value = lsdi.get("value")
        value_txt = f"{value:.4f}" if value is not None else "-"
        case = lsdi.get("degenerate_case")
        case_txt = f" ({case})" if case not in (None, "none") else ""
        lines.append(f"{name}: informative dims {blob.get('informative')}  "
                     f"separation index {value_txt}{case_txt}")
    label = m.get("label_traversal")
    if label:
        lines.append(f"label traversal top features: {label.get('top_features')}")
    lines.append("")

    per_run = m.get("per_run") or []
    if per_run:
        lines.append("run  seed  collapsed  n_informative  final_loss")
        for r in per_run:
            loss = r.get("final_loss")
            loss_txt = f"{loss:.6f}" if loss is not None else "-"
            lines.append(f"{r['run']:>3}  {r['seed']:>4}  {str(r['collapsed']):>9}  "
                         f"{len(r.get('informative_fvh_lt', [])):>13}  {loss_txt}")
    return "\n".join(lines) + "\n"


FORMATS = ("csv", "svg", "json", "all")


def render_report(bundle_path, out_format="all"):
    """Write report artifacts under <bundle>/report; returns written paths."""
    if out_format not in FORMATS:
        raise BundleError(f"unknown report format {out_format!r}, choose from {FORMATS}")
    bundle = bundle_path if isinstance(bundle_path, RunBundle) else load_bundle(bundle_path)
    rdir = os.path.join(bundle.path, "report")
    os.makedirs(rdir, exist_ok=True)
    written = []

    def emit_text(name, text):
        path = os.path.join(rdir, name)
        _write_text(path, text)
        written.append(path)

    emit_text("summary.txt", summary_text(bundle))
    aggregates = bundle.aggregates or {}
    if out_format in ("csv", "all"):
        for key, mat in sorted(aggregates.items()):
            emit_text(f"{key}.csv", mat.to_csv_text())
    if out_format in ("svg", "all"):
        titles = {"fvh_lt": "traversal output variance",
                  "dbsr_magnitude": "regression coefficient magnitude",
                  "dbsr_signed": "regression coefficients (magnitude shown)"}
        for key, mat in sorted(aggregates.items()):
            extra = bundle.label_traversal if key == "fvh_lt" else None
            emit_text(f"{key}.svg", heatmap_svg(mat, titles[key], extra_row=extra))
    if out_format in ("json", "all"):
        if bundle.metrics is not None:
            path = os.path.join(rdir, "metrics.json")
            _write_json(path, bundle.metrics)
            written.append(path)
    return written


def compare_text(bundles):
    """Side-by-side metric table; refuses bundles from different datasets
    or latent sizes."""
    if not bundles:
        raise BundleError("nothing to compare: no bundles given")
    loaded = [b if isinstance(b, RunBundle) else load_bundle(b) for b in bundles]
    first = loaded[0]
    first_id = first.config.dataset.identity()
    for other in loaded[1:]:
        other_id = other.config.dataset.identity()
        if other_id != first_id:
            raise BundleError(
                "refusing to compare bundles from different datasets: "
                f"{first.path} has {first_id}, {other.path} has {other_id}")
        if other.config.latent_dim != first.config.latent_dim:
            raise BundleError(
                "refusing to compare bundles with different latent sizes: "
                f"{first.path} has K={first.config.latent_dim}, "
                f"{other.path} has K={other.config.latent_dim}")

    rows = [_metric_row(b) for b in loaded]
    labels = []
    seen = {}
    for row, b in zip(rows, loaded):
        label = row["variant"]
        if label in seen or sum(1 for r in rows if r["variant"] == label) > 1:
            label = f"{label}#{seen.get(row['variant'], 0) + 1}"
        seen[row["variant"]] = seen.get(row["variant"], 0) + 1
        labels.append(label)
    head = [f"comparison on {first_id} (K={first.config.latent_dim})", ""]
    return "\n".join(head + [_table(rows, labels)]) + "\n"
