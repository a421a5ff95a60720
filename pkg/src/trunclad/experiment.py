"""Replicated simulation studies and the real-data workflow.

Each replication derives its own seed from the master seed, simulates one
continuous path (presample, training window, test window), fits every
configured loss on identical data from an identical start, and returns risk
trajectories and forecast errors.  Results are folded in replication order,
so the report does not depend on how many worker processes ran.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .errors import DimensionError, NumericError, ParameterError, UnstableModelError
from .evaluation import Summary, aggregate, delta_comparison, empirical_l1_risk, log10_error, prediction_error
from .losses import LossSpec, PenaltySpec
from .optimizer import SgdConfig, fit_many, risk_trajectory, sample_indices
from .rng import MASK64, RngStream, splitmix64
from .var_model import TimeSeries, companion, is_stable, lag_design, simulate, spectral_radius


def replication_seed(master_seed: int, i: int) -> int:
    return splitmix64((int(master_seed) + int(i)) & MASK64)


def cell_key(loss: LossSpec):
    return (loss.name, loss.alpha if loss.kind == "psi_alpha" else None)


@dataclass
class CellResult:
    """Aggregates for one loss (and exponent, for the truncated loss)."""

    loss: str
    alpha: float | None
    label: str
    steps: np.ndarray
    mean_risk: np.ndarray
    final_risks: np.ndarray
    log_errors: np.ndarray
    failures: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.final_risks.size)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    @property
    def mean_final_risk(self) -> float:
        return float(math.fsum(self.final_risks) / self.final_risks.size) if self.final_risks.size else math.nan

    @property
    def mean_log_error(self) -> float:
        return float(math.fsum(self.log_errors) / self.log_errors.size) if self.log_errors.size else math.nan

    @property
    def log_error_summary(self) -> Summary | None:
        return aggregate(self.log_errors) if self.log_errors.size else None


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    model: str
    noise: str
    shape: float | None
    cells: list
    deltas: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    hill: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def cell(self, loss: str, alpha: float | None = None) -> CellResult:
        for c in self.cells:
            if c.loss == loss and (alpha is None or c.alpha == alpha):
                return c
        raise KeyError((loss, alpha))


def _sgd_configs(cfg: ExperimentConfig, theta0, gamma=None, eta=None, sampling="sequential", steps=None,
                 c0=None, c0_stride=1):
    gamma = cfg.sgd.gamma if gamma is None else gamma
    return [
        SgdConfig(loss=ls, penalty=PenaltySpec(gamma), eta=cfg.sgd.eta if eta is None else eta,
                  steps=cfg.sgd.steps if steps is None else steps, theta0=theta0, sampling=sampling,
                  c0=c0, risk_eval_stride=c0_stride)
        for ls in cfg.losses.specs()
    ]


def run_replication(cfg: ExperimentConfig, i: int) -> dict:
    """One replication; returns ``{"ok": bool, "error": str|None, "cells": [...]}``.

    Each cell entry is ``(risks at the stride grid, final risk, log10 forecast error, error)``.
    """
    coeffs = cfg.model.coefficients()
    p = coeffs.p
    rng = RngStream(replication_seed(cfg.run.master_seed, i), 0)
    n_total = p + cfg.run.n_train + cfg.run.L
    try:
        path = simulate(coeffs, cfg.noise.spec(), n_total, cfg.run.burn_in, rng).values
    except NumericError as exc:
        return {"ok": False, "error": str(exc), "cells": None}
    train = path[:p + cfg.run.n_train]
    x, y = lag_design(train, p)
    theta0 = cfg.theta0()
    configs = _sgd_configs(cfg, theta0, c0=cfg.sgd.c0, c0_stride=cfg.sgd.c0_stride)
    trajs = fit_many(x, y, configs, np.arange(cfg.sgd.steps))
    cells = []
    for tr in trajs:
        if tr.error is not None:
            cells.append((None, math.nan, math.nan, str(tr.error)))
            continue
        _, risks = risk_trajectory(tr, x, y, cfg.run.risk_stride)
        if not np.all(np.isfinite(risks)):
            cells.append((None, math.nan, math.nan, "non-finite empirical risk"))
            continue
        if cfg.run.L > 0:
            err = prediction_error(tr.final, train[-p:], path[p + cfg.run.n_train:])
            lerr = log10_error(err) if math.isfinite(err) else math.nan
        else:
            lerr = math.nan
        cells.append((risks, float(risks[-1]), lerr, None))
    return {"ok": True, "error": None, "cells": cells}


def _worker(args):
    cfg, i = args
    return run_replication(cfg, i)


def _stride_grid(n, stride):
    steps = list(range(0, n + 1, stride))
    if steps[-1] != n:
        steps.append(n)
    return np.array(steps)


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Replicated simulation study.

    Raises
    ------
    UnstableModelError
        If the VAR coefficients fail the stability gate.
    """
    cfg.validate()
    coeffs = cfg.model.coefficients()
    if not is_stable(coeffs, 1.0 - 1e-6):
        raise UnstableModelError(
            f"model {cfg.model.name!r} has companion spectral radius "
            f"{spectral_radius(companion(coeffs)):.6f} >= 1; it cannot be simulated")
    t0 = time.perf_counter()
    reps = cfg.run.replications
    jobs = [(cfg, i) for i in range(reps)]
    if cfg.run.threads > 1 and reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.run.threads) as pool:
            results = list(pool.map(_worker, jobs, chunksize=max(1, reps // (4 * cfg.run.threads))))
    else:
        results = []
        for job in jobs:
            results.append(_worker(job))
            if progress is not None:
                progress(len(results), reps)
    losses = cfg.losses.specs()
    steps = _stride_grid(cfg.sgd.steps, cfg.run.risk_stride)
    cells = []
    for j, ls in enumerate(losses):
        trajs, finals, lerrs, fails = [], [], [], []
        for i, res in enumerate(results):
            if not res["ok"]:
                fails.append((i, res["error"]))
                continue
            risks, final, lerr, err = res["cells"][j]
            if err is not None:
                fails.append((i, err))
                continue
            trajs.append(risks)
            finals.append(final)
            if math.isfinite(lerr):
                lerrs.append(lerr)
        mean_traj = np.mean(np.stack(trajs), axis=0) if trajs else np.full(steps.size, math.nan)
        name, alpha = cell_key(ls)
        cells.append(CellResult(name, alpha, ls.label(), steps, mean_traj, np.array(finals), np.array(lerrs),
                                fails))
    noise = cfg.noise.spec()
    report = ExperimentReport(
        kind="simulation",
        config=cfg.to_dict(),
        model=cfg.model.name,
        noise=noise.law,
        shape=noise.shape,
        cells=cells,
        runtime={"seconds": time.perf_counter() - t0, "threads": cfg.run.threads},
    )
    report.deltas = _risk_deltas(cells)
    return report


def _risk_deltas(cells):
    """Relative gaps of mean final risk: (LAD, psi), (LAD, Huber), (Huber, psi)."""
    by = {}
    for c in cells:
        by.setdefault(c.loss, []).append(c)
    out = []
    lad = by.get("lad", [None])[0]
    hub = by.get("huber", [None])[0]
    for psi in by.get("psi_alpha", []):
        if lad is not None and lad.mean_final_risk > 0:
            out.append(("lad", "psi_alpha", psi.alpha, delta_comparison(lad.mean_final_risk, psi.mean_final_risk)))
        if hub is not None and hub.mean_final_risk > 0:
            out.append(("huber", "psi_alpha", psi.alpha,
                        delta_comparison(hub.mean_final_risk, psi.mean_final_risk)))
    if lad is not None and hub is not None and lad.mean_final_risk > 0:
        out.append(("lad", "huber", None, delta_comparison(lad.mean_final_risk, hub.mean_final_risk)))
    return out


def run_real_data(series: TimeSeries, cfg: ExperimentConfig) -> ExperimentReport:
    """Fit an observed series with uniform sampling and the penalty-drop rule.

    Rows ``0..p-1`` are presample, the next ``n_train`` rows are training
    responses and the ``L`` rows after that are the forecast target.
    Prediction errors are taken at every checkpoint step.
    """
    rc = cfg.real
    p = rc.p
    if rc.L < 1:
        raise ParameterError("real-data runs need a test window (L >= 1)")
    if rc.n_train < 1 or p < 1:
        raise ParameterError("n_train and p must be >= 1")
    if series.n < p + rc.n_train + rc.L:
        raise DimensionError(f"series has {series.n} rows; need p + n_train + L = {p + rc.n_train + rc.L}")
    checkpoints = sorted(int(c) for c in rc.checkpoints)
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > rc.n_iter):
        raise ParameterError(f"checkpoints must lie in [0, {rc.n_iter}]")
    t0 = time.perf_counter()
    z = series.values
    train = z[:p + rc.n_train]
    truth = z[p + rc.n_train:p + rc.n_train + rc.L]
    x, y = lag_design(train, p)
    theta0 = np.zeros((series.d, series.d * p))
    configs = _sgd_configs(cfg, theta0, gamma=rc.gamma, eta=rc.eta, sampling="uniform", steps=rc.n_iter,
                           c0=rc.c0, c0_stride=rc.c0_stride)
    rng = RngStream(splitmix64(cfg.run.master_seed), 0)
    idx = sample_indices(x.shape[0], rc.n_iter, "uniform", rng)
    grid = _stride_grid(rc.n_iter, cfg.run.risk_stride)
    trajs = fit_many(x, y, configs, idx, record=np.union1d(grid, checkpoints))
    cells, rows, errs = [], [], {}
    for tr in trajs:
        name, alpha = cell_key(tr.loss)
        if tr.error is not None:
            cells.append(CellResult(name, alpha, tr.loss.label(), grid, np.full(grid.size, math.nan),
                                    np.array([]), np.array([]), [(0, str(tr.error))]))
            continue
        _, risks = risk_trajectory(tr, x, y, cfg.run.risk_stride)
        lerrs = []
        for k in checkpoints:
            e = prediction_error(tr.at(k), train[-p:], truth)
            errs[(name, alpha, k)] = e
            lerrs.append(log10_error(e))
            rows.append((k, name, alpha, e, lerrs[-1], tr.penalty_drop_step))
        cells.append(CellResult(name, alpha, tr.loss.label(), grid, risks, np.array([risks[-1]]),
                                np.array(lerrs)))
    deltas = []
    psis = [c.alpha for c in cells if c.loss == "psi_alpha"]
    for k in checkpoints:
        for a in psis:
            if ("lad", None, k) in errs and ("psi_alpha", a, k) in errs:
                deltas.append((k, "lad", "psi_alpha", a, delta_comparison(errs[("lad", None, k)],
                                                                       errs[("psi_alpha", a, k)])))
            if ("huber", None, k) in errs and ("psi_alpha", a, k) in errs:
                deltas.append((k, "huber", "psi_alpha", a, delta_comparison(errs[("huber", None, k)],
                                                                         errs[("psi_alpha", a, k)])))
        if ("lad", None, k) in errs and ("huber", None, k) in errs:
            deltas.append((k, "lad", "huber", None, delta_comparison(errs[("lad", None, k)],
                                                                   errs[("huber", None, k)])))
    return ExperimentReport(
        kind="real",
        config=cfg.to_dict(),
        model=f"var{p}-fit",
        noise=str(series.meta.get("source", "observed")),
        shape=None,
        cells=cells,
        deltas=deltas,
        checkpoints=rows,
        runtime={"seconds": time.perf_counter() - t0, "initial_risk": float(empirical_l1_risk(theta0, x, y))},
    )
