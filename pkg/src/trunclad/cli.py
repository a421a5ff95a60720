"""Command-line entry point.

Subcommands::

    simulate    simulate a VAR path and write it as a time-series CSV
    fit         fit the three estimators to an observed series (uniform sampling, penalty drop)
    experiment  replicated simulation study with CSV and SVG output
    hill        Hill tail-index table for the row norms of a series
    toy         failure probability of the median in the sparse toy model
    bound       tuning parameters and excess-risk rate over a grid of sample sizes
    ingest      read a CSV, apply a transform and write a clean series file
    report      rebuild the SVG figures from an experiment output directory

Exit status is 0 on success, 2 for configuration or input errors and 3 for
numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import ExperimentConfig, from_dict, load_config, with_overrides
from .csvio import ingest_csv, write_series
from .errors import ConfigError, DimensionError, NumericError, ParameterError
from .evaluation import hill_table
from .experiment import CellResult, ExperimentReport, run_experiment, run_real_data
from .report import box_svg, render_report, risk_svg, write_bound_csv, write_hill_csv, _write_csv
from .rng import RngStream
from .theory import TheoryParams, bound_rows, toy_failure_limit, toy_lad_failure_prob, toy_median_mc
from .var_model import simulate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else from_dict({})
    return with_overrides(cfg, seed=args.seed, threads=args.threads)


def _out(args, name=None):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name) if name else args.out


def cmd_simulate(args):
    cfg = _config(args)
    coeffs = cfg.model.coefficients()
    n = args.n if args.n is not None else coeffs.p + cfg.run.n_train + cfg.run.L
    rng = RngStream(cfg.run.master_seed, 0)
    series = simulate(coeffs, cfg.noise.spec(), n, cfg.run.burn_in, rng)
    path = _out(args, "series.csv")
    write_series(path, series)
    print(f"wrote {series.n} x {series.d} series to {path}")


def _load_series(args, cfg):
    src = args.input or cfg.real.path
    if not src:
        raise ConfigError("no input series: pass --input or set real.path")
    cols = args.columns.split(",") if getattr(args, "columns", None) else cfg.real.columns
    return ingest_csv(src, getattr(args, "transform", None) or cfg.real.transform, cols)


def cmd_fit(args):
    cfg = _config(args)
    series = _load_series(args, cfg)
    report = run_real_data(series, cfg)
    report.hill = hill_table(np.linalg.norm(series.values, axis=1), min(cfg.real.hill_k, series.n - 1))
    for path in render_report(report, _out(args)):
        print(path)
    for c in report.cells:
        print(f"{c.label}: final risk {c.mean_final_risk:.6g}")


def cmd_experiment(args):
    cfg = _config(args)

    def progress(done, total):
        if args.verbose:
            print(f"\r{done}/{total}", end="", file=sys.stderr)

    report = run_experiment(cfg, progress=progress)
    if args.verbose:
        print(file=sys.stderr)
    render_report(report, _out(args))
    for c in report.cells:
        failed = f", {c.n_failed} failed" if c.n_failed else ""
        print(f"{c.label}: mean risk {c.mean_final_risk:.6g}, mean log10 error {c.mean_log_error:.4g} "
              f"({c.count} ok{failed})")


def cmd_hill(args):
    cfg = _config(args)
    series = _load_series(args, cfg)
    norms = np.linalg.norm(series.values, axis=1)
    k_max = min(args.k_max or cfg.real.hill_k, norms.size - 1)
    rows = hill_table(norms, k_max)
    write_hill_csv(_out(args, "hill.csv"), rows)
    k, _, g, inv = rows[-1]
    print(f"gamma*({k}) = {g:.6g}, tail index estimate {inv:.6g}")


def cmd_toy(args):
    ns = args.n or [201, 2001, 20001]
    rows = []
    for n in ns:
        rows.append((n, toy_lad_failure_prob(n)))
        print(f"n={n}: failure probability {rows[-1][1]:.6f}")
    print(f"limit 2*Phi(-1) = {toy_failure_limit():.6f}")
    _write_csv(_out(args, "toy.csv"), ["n", "failure_prob"], rows)
    if args.mc:
        seed = args.seed if args.seed is not None else 20240101
        f, se = toy_median_mc(ns[0], args.mc, RngStream(seed, 0))
        print(f"Monte Carlo at n={ns[0]}: {f:.5f} +/- {se:.5f}")


def cmd_bound(args):
    base = TheoryParams(n=max(args.n[0], 3), beta=args.beta, B=args.B, d1=args.d1, d2=args.d2, kappa=args.kappa,
                        R=args.R, alpha=args.alpha, eps=args.eps)
    rows = bound_rows(args.n, base)
    write_bound_csv(_out(args, "bound.csv"), rows)
    for r in rows:
        print("n={} delta={:.6g} lambda={:.6g} gamma={:.6g} rate={:.6g}".format(*r))


def cmd_ingest(args):
    series = ingest_csv(args.input, args.transform, args.columns.split(",") if args.columns else None)
    path = _out(args, "series.csv")
    write_series(path, series)
    print(f"wrote {series.n} x {series.d} series to {path}")


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(args):
    src = args.input or args.out
    try:
        risk = _read_rows(os.path.join(src, "risk_trajectories.csv"))
        lerr = _read_rows(os.path.join(src, "log_errors.csv"))
        with open(os.path.join(src, "report.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read report directory {src}: {exc}") from exc
    cells = []
    for c in meta["cells"]:
        a = "" if c["alpha"] is None else repr(float(c["alpha"]))
        rr = [r for r in risk if r["loss"] == c["loss"] and r["alpha"] == a]
        le = [float(r["log10_err"]) for r in lerr if r["loss"] == c["loss"] and r["alpha"] == a]
        label = c["loss"] if c["alpha"] is None else f"{c['loss']}(alpha={c['alpha']:g})"
        cells.append(CellResult(c["loss"], c["alpha"], label, np.array([int(r["step"]) for r in rr]),
                                np.array([float(r["mean_risk"]) for r in rr]), np.array([]), np.array(le)))
    rep = ExperimentReport(meta["kind"], meta["config"], meta["model"], meta["noise"], meta["shape"], cells)
    _out(args)
    for name, text in (("risk.svg", risk_svg(rep)), ("prediction_errors.svg", box_svg(rep))):
        p = os.path.join(args.out, name)
        with open(p, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(p)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--seed", type=int, help="override run.master_seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--threads", type=int, help="worker processes for replications")

    parser = argparse.ArgumentParser(prog="trunclad", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a VAR path")
    p.add_argument("--n", type=int, help="rows to keep after burn-in")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit an observed series")
    p.add_argument("--input", help="series CSV (default: real.path)")
    p.add_argument("--transform", choices=("none", "diff", "logdiff"))
    p.add_argument("--columns", help="comma-separated column names or indices")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", parents=[common], help="replicated simulation study")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("hill", parents=[common], help="Hill tail-index table")
    p.add_argument("--input", help="series CSV (default: real.path)")
    p.add_argument("--transform", choices=("none", "diff", "logdiff"))
    p.add_argument("--columns")
    p.add_argument("--k-max", type=int, dest="k_max")
    p.set_defaults(func=cmd_hill)

    p = sub.add_parser("toy", parents=[common], help="toy-model failure probability")
    p.add_argument("--n", type=int, nargs="+", help="odd sample sizes")
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo trials at the first n")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("bound", parents=[common], help="tuning parameters and rate")
    p.add_argument("--n", type=int, nargs="+", default=[1000, 10_000, 100_000, 1_000_000])
    p.add_argument("--beta", type=float, default=0.2554)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--d1", type=int, default=5)
    p.add_argument("--d2", type=int, default=5)
    p.add_argument("--kappa", type=int, default=5)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--eps", type=float, default=0.05)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("ingest", parents=[common], help="clean and transform a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--transform", choices=("none", "diff", "logdiff"), default="none")
    p.add_argument("--columns")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", parents=[common], help="rebuild figures from an output directory")
    p.add_argument("--input", help="directory with experiment CSVs (default: --out)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ParameterError, DimensionError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
