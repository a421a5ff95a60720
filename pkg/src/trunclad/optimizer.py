"""Stochastic subgradient descent for the truncated, Huber and absolute objectives.

All fits go through one engine that advances several configurations in
lock-step on the same sample sequence; :func:`sgd_fit` is the one-config case
and :func:`fit_all_three` the paired comparison.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, ParameterError
from .evaluation import empirical_l1_risk
from .losses import LossSpec, PenaltySpec, penalty_subgradient, sample_subgradient
from .rng import RngStream
from .var_model import operator_norm

SAMPLING = ("sequential", "uniform")


@dataclass
class SgdConfig:
    """Settings of one SGD run.

    ``sampling="sequential"`` consumes pair ``k`` at step ``k`` (one pass);
    ``"uniform"`` draws the pair index uniformly with replacement.  When
    ``c0`` is set the penalty is switched off for good the first time the
    relative change of the full-window empirical risk between consecutive
    iterates is at most ``c0``; the check runs every ``risk_eval_stride``
    steps.  ``projection`` caps the operator norm of every iterate.
    """

    loss: LossSpec
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    eta: float = 0.01
    steps: int = 800
    theta0: np.ndarray | None = None
    sampling: str = "sequential"
    c0: float | None = None
    risk_eval_stride: int = 1
    projection: float | None = None

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if self.steps < 0:
            raise ParameterError(f"steps must be >= 0, got {self.steps}")
        if self.sampling not in SAMPLING:
            raise ParameterError(f"sampling must be one of {SAMPLING}, got {self.sampling!r}")
        if self.c0 is not None and not self.c0 > 0:
            raise ParameterError(f"c0 must be positive, got {self.c0}")
        if self.risk_eval_stride < 1:
            raise ParameterError("risk_eval_stride must be >= 1")
        if self.projection is not None and not self.projection > 0:
            raise ParameterError("projection cap must be positive")
        if self.theta0 is not None:
            self.theta0 = np.array(self.theta0, dtype=float, ndmin=2)


@dataclass
class FitTrajectory:
    """Iterates ``theta_0 .. theta_N`` of one run plus per-step diagnostics.

    ``steps[i]`` is the iteration index of ``thetas[i]``; it is ``0..N`` unless
    the fit was asked to keep only selected iterates.
    """

    loss: LossSpec
    thetas: np.ndarray
    steps: np.ndarray
    indices: np.ndarray
    residual_norms: np.ndarray
    penalty_drop_step: int | None = None
    risk_checks: list = field(default_factory=list)
    error: NumericError | None = None

    @property
    def final(self) -> np.ndarray:
        return self.thetas[-1]

    def __len__(self):
        return self.thetas.shape[0]

    def at(self, step: int) -> np.ndarray:
        """Iterate after ``step`` updates."""
        pos = int(np.searchsorted(self.steps, step))
        if pos >= len(self.steps) or self.steps[pos] != step:
            raise ParameterError(f"step {step} was not recorded")
        return self.thetas[pos]


def _as_pairs(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] != y.shape[0]:
        raise DimensionError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] == 0:
        raise DimensionError("no training pairs")
    return x, y


def sgd_step(theta, x, y, config: SgdConfig, *, gamma=None, eta=None) -> np.ndarray:
    """One update ``theta - eta * (loss subgradient + gamma * sign(theta))``.

    ``gamma`` defaults to the configured penalty; pass 0 once the drop rule
    has fired.  ``eta`` overrides the configured learning rate.
    """
    theta = np.array(theta, dtype=float, ndmin=2)
    g = config.penalty.effective if gamma is None else gamma
    lr = config.eta if eta is None else eta
    grad = sample_subgradient(config.loss, y, x, theta) + penalty_subgradient(theta, g)
    new = theta - lr * grad
    if config.projection is not None:
        nrm = operator_norm(new)
        if nrm > config.projection:
            new = new * (config.projection / nrm)
    if not np.all(np.isfinite(new)):
        raise NumericError("non-finite SGD update")
    return new


def sample_indices(n_pairs: int, steps: int, sampling: str, rng: RngStream | None = None) -> np.ndarray:
    if sampling == "sequential":
        if steps > n_pairs:
            raise ParameterError(f"sequential pass needs steps <= pairs ({steps} > {n_pairs})")
        return np.arange(steps)
    if rng is None:
        raise ParameterError("uniform sampling needs an RngStream")
    return np.asarray(rng.integers(0, n_pairs, steps), dtype=np.int64)


def _weights(kind, alpha, lam, tau, sigma, r):
    u = lam * r
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        psi_w = (1.0 + u ** (alpha - 1.0)) / (1.0 + u + u**alpha / alpha)
    psi_w = np.where(u == 0.0, 1.0, psi_w)
    return np.where(kind == 0, psi_w, np.where(kind == 1, np.minimum(sigma * r, tau), 1.0))


def fit_many(x, y, configs, indices, record=None) -> list[FitTrajectory]:
    """Run several configurations in lock-step on the same pair sequence.

    A configuration whose iterate turns non-finite is frozen from that step on
    and reported through ``FitTrajectory.error``; the others continue.
    ``record`` optionally restricts the stored iterates to the given steps
    (the final step is always kept).
    """
    x, y = _as_pairs(x, y)
    configs = list(configs)
    c = len(configs)
    d1, d2 = x.shape[1], y.shape[1]
    steps = len(indices)
    kind = np.array([("psi_alpha", "huber", "absolute").index(cf.loss.kind) for cf in configs])
    alpha = np.array([cf.loss.alpha for cf in configs])
    lam = np.array([cf.loss.lam if cf.loss.kind == "psi_alpha" else 1.0 for cf in configs])
    tau = np.array([cf.loss.tau for cf in configs])
    sigma = np.array([cf.loss.sigma for cf in configs])
    eta = np.array([cf.eta for cf in configs])[:, None, None]
    gamma = np.array([cf.penalty.effective for cf in configs])
    caps = [cf.projection for cf in configs]
    c0 = [cf.c0 for cf in configs]
    stride = [cf.risk_eval_stride for cf in configs]

    theta = np.empty((c, d2, d1))
    for i, cf in enumerate(configs):
        t0 = np.zeros((d2, d1)) if cf.theta0 is None else cf.theta0
        if t0.shape != (d2, d1):
            raise DimensionError(f"theta0 has shape {t0.shape}, expected ({d2}, {d1})")
        theta[i] = t0
    if record is None:
        keep = np.arange(steps + 1)
    else:
        keep = np.union1d(np.asarray(record, dtype=np.int64), [steps])
        if keep.min() < 0 or keep.max() > steps:
            raise ParameterError(f"recorded steps must lie in [0, {steps}]")
    slot = np.full(steps + 1, -1)
    slot[keep] = np.arange(keep.size)
    thetas = np.empty((keep.size, c, d2, d1))
    if slot[0] >= 0:
        thetas[slot[0]] = theta
    rnorms = np.zeros((steps, c))
    drop = [None] * c
    checks = [[] for _ in range(c)]
    errors = [None] * c
    alive = np.ones(c, dtype=bool)

    for k in range(steps):
        i = indices[k]
        xk = x[i]
        e = y[i] - theta @ xk
        r = np.sqrt((e * e).sum(axis=1))
        w = _weights(kind, alpha, lam, tau, sigma, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(r > 0.0, w / r, 0.0)
        grad = (-coef)[:, None, None] * e[:, :, None] * xk[None, None, :]
        grad += gamma[:, None, None] * np.sign(theta)
        new = theta - eta * grad
        for j, cap in enumerate(caps):
            if cap is not None and alive[j] and np.all(np.isfinite(new[j])):
                nrm = operator_norm(new[j])
                if nrm > cap:
                    new[j] *= cap / nrm
        finite = np.isfinite(new).all(axis=(1, 2))
        if not finite.all():
            for j in np.flatnonzero(~finite & alive):
                errors[j] = NumericError(f"non-finite SGD iterate at step {k + 1}", step=k + 1)
                alive[j] = False
            new[~alive] = theta[~alive]
        rnorms[k] = r
        for j in range(c):
            if c0[j] is None or drop[j] is not None or not alive[j] or (k + 1) % stride[j]:
                continue
            r_old, r_new = empirical_l1_risk(np.stack([theta[j], new[j]]), x, y)
            if not (np.isfinite(r_old) and np.isfinite(r_new)):
                errors[j] = NumericError(f"non-finite empirical risk at step {k + 1}", step=k + 1)
                alive[j] = False
                continue
            if r_old > 0:
                delta = abs(r_new - r_old) / r_old
            else:
                delta = 0.0 if r_new == 0 else np.inf
            checks[j].append((k + 1, float(r_new), float(delta)))
            if delta <= c0[j]:
                drop[j] = k + 1
                gamma[j] = 0.0
        theta = new
        if slot[k + 1] >= 0:
            thetas[slot[k + 1]] = theta
    return [
        FitTrajectory(
            loss=cf.loss,
            thetas=thetas[:, j],
            steps=keep,
            indices=np.asarray(indices),
            residual_norms=rnorms[:, j],
            penalty_drop_step=drop[j],
            risk_checks=checks[j],
            error=errors[j],
        )
        for j, cf in enumerate(configs)
    ]


def sgd_fit(x, y, config: SgdConfig, rng: RngStream | None = None, record=None) -> FitTrajectory:
    """Fit one configuration on the pairs ``(x[i], y[i])``.

    Raises
    ------
    NumericError
        If an iterate or the empirical risk becomes non-finite.
    """
    x, y = _as_pairs(x, y)
    idx = sample_indices(x.shape[0], config.steps, config.sampling, rng)
    traj = fit_many(x, y, [config], idx, record)[0]
    if traj.error is not None:
        raise traj.error
    return traj


def fit_all_three(x, y, psi: LossSpec, huber: LossSpec, *, penalty=PenaltySpec(), eta=0.01, steps=800,
                  theta0=None, sampling="sequential", c0=None, risk_eval_stride=1, rng=None, record=None):
    """Truncated, absolute and Huber fits on identical data, start point and sample order.

    Returns a dict keyed by ``"psi_alpha"``, ``"lad"`` and ``"huber"``.
    """
    x, y = _as_pairs(x, y)
    losses = [psi, LossSpec.absolute(), huber]
    configs = [
        SgdConfig(loss=ls, penalty=penalty, eta=eta, steps=steps, theta0=theta0, sampling=sampling,
                  c0=c0, risk_eval_stride=risk_eval_stride)
        for ls in losses
    ]
    idx = sample_indices(x.shape[0], steps, sampling, rng)
    trajs = fit_many(x, y, configs, idx, record)
    for t in trajs:
        if t.error is not None:
            raise t.error
    return {t.loss.name: t for t in trajs}


def risk_trajectory(traj: FitTrajectory, x, y, stride: int = 1):
    """Steps ``0, stride, ...`` (always including N) and the empirical risk there."""
    n = int(traj.steps[-1])
    steps = list(range(0, n + 1, stride))
    if steps[-1] != n:
        steps.append(n)
    steps = np.array(steps)
    pos = np.searchsorted(traj.steps, steps)
    if np.any(pos >= len(traj.steps)) or np.any(traj.steps[np.minimum(pos, len(traj.steps) - 1)] != steps):
        raise ParameterError("trajectory does not hold the iterates needed for this stride")
    return steps, empirical_l1_risk(traj.thetas[pos], x, y)


def write_trajectory_csv(path, trajectories, x, y, stride: int = 1):
    """CSV rows ``(step, loss_name, empirical_risk)`` for a mapping name -> trajectory."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss_name", "empirical_risk"])
        for name, traj in trajectories.items():
            steps, risks = risk_trajectory(traj, x, y, stride)
            for s, r in zip(steps, risks):
                w.writerow([int(s), name, repr(float(r))])
