"""CSV tables, self-contained SVG figures and a JSON echo for experiment reports.

CSV files hold only deterministic quantities; timing and host details go to
``report.json`` so that repeated runs produce byte-identical CSVs.
"""
from __future__ import annotations

import csv
import json
import math
import os
from xml.sax.saxutils import escape

from .evaluation import aggregate

PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def risk_rows(report):
    for c in report.cells:
        for s, r in zip(c.steps, c.mean_risk):
            yield int(s), c.loss, c.alpha, float(r)


def prediction_rows(report):
    for c in report.cells:
        s = c.log_error_summary
        if s is None:
            yield c.loss, c.alpha, math.nan, math.nan, math.nan, math.nan
        else:
            yield c.loss, c.alpha, s.mean, s.median, s.q1, s.q3


def table_rows(report):
    for c in report.cells:
        yield report.model, report.noise, report.shape, c.alpha, c.loss, c.mean_final_risk, c.mean_log_error


TABLE_HEADER = ["model", "noise", "shape", "alpha", "loss", "mean_risk", "mean_log_pred_err"]


def write_table(path, reports):
    """Table-1 layout for one or more reports."""
    _write_csv(path, TABLE_HEADER, (row for rep in reports for row in table_rows(rep)))


def write_hill_csv(path, rows):
    _write_csv(path, ["k", "gamma_k", "gamma_star_k", "inv_gamma_star_k"], rows)


def write_bound_csv(path, rows):
    _write_csv(path, ["n", "delta", "lambda", "gamma", "rate"], rows)


# -- SVG ----------------------------------------------------------------------------

def _frame(width, height, title, body):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.1f}" y="18" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{escape(title)}</text>\n'
        + "".join(body)
        + "</svg>\n"
    )


def _axes(x0, y0, x1, y1, lo, hi, xlab, ylab, xticks):
    out = [
        f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>\n',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>\n',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{y1 + 32}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle">{escape(xlab)}</text>\n',
        f'<text x="12" y="{(y0 + y1) / 2:.1f}" font-family="sans-serif" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {(y0 + y1) / 2:.1f})">{escape(ylab)}</text>\n',
    ]
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        y = y1 - (y1 - y0) * i / 4
        out.append(f'<text x="{x0 - 4}" y="{y + 4:.1f}" font-family="sans-serif" font-size="9" '
                   f'text-anchor="end">{v:.3g}</text>\n')
    for x, lab in xticks:
        out.append(f'<text x="{x:.1f}" y="{y1 + 14}" font-family="sans-serif" font-size="9" '
                   f'text-anchor="middle">{escape(lab)}</text>\n')
    return out


def _range(values):
    vals = [v for v in values if math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def risk_svg(report, width=640, height=400) -> str:
    """Mean empirical risk against step, one polyline per cell."""
    x0, y0, x1, y1 = 60, 30, width - 170, height - 50
    cells = [c for c in report.cells if c.mean_risk.size and all(math.isfinite(v) for v in c.mean_risk)]
    lo, hi = _range([v for c in cells for v in c.mean_risk])
    n = max((int(c.steps[-1]) for c in cells), default=1) or 1
    ticks = [(x0 + (x1 - x0) * i / 4, f"{n * i / 4:.0f}") for i in range(5)]
    body = _axes(x0, y0, x1, y1, lo, hi, "step", "mean empirical risk", ticks)
    for j, c in enumerate(cells):
        pts = " ".join(
            f"{x0 + (x1 - x0) * s / n:.2f},{y1 - (y1 - y0) * (v - lo) / (hi - lo):.2f}"
            for s, v in zip(c.steps, c.mean_risk)
        )
        col = PALETTE[j % len(PALETTE)]
        body.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>\n')
        ly = y0 + 14 * j + 6
        body.append(f'<rect x="{x1 + 12}" y="{ly - 6}" width="10" height="3" fill="{col}"/>\n')
        body.append(f'<text x="{x1 + 26}" y="{ly}" font-family="sans-serif" font-size="9">'
                    f'{escape(c.label)}</text>\n')
    return _frame(width, height, f"{report.model} / {report.noise}", body)


def box_svg(report, width=640, height=400) -> str:
    """Box plots of logged prediction errors, one box per cell."""
    x0, y0, x1, y1 = 60, 30, width - 20, height - 60
    cells = [c for c in report.cells if c.log_errors.size]
    stats = [aggregate(c.log_errors) for c in cells]
    lo, hi = _range([v for s in stats for v in (s.whisker_low, s.whisker_high, *s.outliers)])

    def ys(v):
        return y1 - (y1 - y0) * (v - lo) / (hi - lo)

    k = max(len(cells), 1)
    slot = (x1 - x0) / k
    ticks = [(x0 + slot * (j + 0.5), c.loss if c.alpha is None else f"{c.loss} {c.alpha:g}")
             for j, c in enumerate(cells)]
    body = _axes(x0, y0, x1, y1, lo, hi, "estimator", "log10 prediction error", ticks)
    for j, (c, s) in enumerate(zip(cells, stats)):
        cx = x0 + slot * (j + 0.5)
        hw = min(slot * 0.3, 30)
        col = PALETTE[j % len(PALETTE)]
        body.append(f'<line x1="{cx:.2f}" y1="{ys(s.whisker_low):.2f}" x2="{cx:.2f}" y2="{ys(s.q1):.2f}" '
                    f'stroke="black"/>\n')
        body.append(f'<line x1="{cx:.2f}" y1="{ys(s.q3):.2f}" x2="{cx:.2f}" y2="{ys(s.whisker_high):.2f}" '
                    f'stroke="black"/>\n')
        top, bot = ys(s.q3), ys(s.q1)
        body.append(f'<rect x="{cx - hw:.2f}" y="{top:.2f}" width="{2 * hw:.2f}" height="{max(bot - top, 0.5):.2f}" '
                    f'fill="{col}" fill-opacity="0.5" stroke="black"/>\n')
        body.append(f'<line x1="{cx - hw:.2f}" y1="{ys(s.median):.2f}" x2="{cx + hw:.2f}" y2="{ys(s.median):.2f}" '
                    f'stroke="black" stroke-width="2"/>\n')
        body.append(f'<circle cx="{cx:.2f}" cy="{ys(s.mean):.2f}" r="2.5" fill="black"/>\n')
        for o in s.outliers:
            body.append(f'<circle cx="{cx:.2f}" cy="{ys(o):.2f}" r="2" fill="none" stroke="{col}"/>\n')
    return _frame(width, height, f"{report.model} / {report.noise}: logged prediction errors", body)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def report_summary(report) -> dict:
    return {
        "kind": report.kind,
        "model": report.model,
        "noise": report.noise,
        "shape": report.shape,
        "config": report.config,
        "cells": [
            {"loss": c.loss, "alpha": c.alpha, "count": c.count, "failed": c.n_failed,
             "failures": [list(f) for f in c.failures], "mean_final_risk": c.mean_final_risk,
             "mean_log_pred_err": c.mean_log_error}
            for c in report.cells
        ],
        "deltas": [list(d) for d in report.deltas],
        "runtime": report.runtime,
    }


def render_report(report, out_dir, formats=("csv", "svg")) -> list:
    """Write the report files into ``out_dir``; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path(name):
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    if "csv" in formats:
        _write_csv(path("risk_trajectories.csv"), ["step", "loss", "alpha", "mean_risk"], risk_rows(report))
        _write_csv(path("prediction_errors.csv"), ["loss", "alpha", "mean_log10", "median_log10", "q1", "q3"],
                   prediction_rows(report))
        write_table(path("table.csv"), [report])
        _write_csv(path("log_errors.csv"), ["loss", "alpha", "index", "log10_err"],
                   ((c.loss, c.alpha, i, float(v)) for c in report.cells for i, v in enumerate(c.log_errors)))
        if report.checkpoints:
            _write_csv(path("checkpoints.csv"),
                       ["step", "loss", "alpha", "pred_err", "log10_pred_err", "penalty_drop_step"],
                       report.checkpoints)
        if report.deltas and report.kind == "real":
            _write_csv(path("deltas.csv"), ["step", "reference", "method", "alpha", "delta"], report.deltas)
        if report.hill:
            write_hill_csv(path("hill.csv"), report.hill)
    if "svg" in formats:
        with open(path("risk.svg"), "w", encoding="utf-8") as fh:
            fh.write(risk_svg(report))
        with open(path("prediction_errors.svg"), "w", encoding="utf-8") as fh:
            fh.write(box_svg(report))
    with open(path("report.json"), "w", encoding="utf-8") as fh:
        json.dump(_jsonable(report_summary(report)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written
