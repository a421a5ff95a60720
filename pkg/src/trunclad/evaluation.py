"""Risk and forecast metrics, replication summaries and Hill tail-index estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .var_model import forecast

LOG10_FLOOR = -12.0


def empirical_l1_risk(theta, x, y, chunk: int = 64):
    """Mean Euclidean residual norm ``(1/N) sum |y_i - theta x_i|``.

    ``theta`` may carry leading batch axes (``(..., d2, d1)``); the result then
    has the batch shape.  ``x`` is ``(N, d1)`` and ``y`` is ``(N, d2)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise DimensionError(f"need matching non-empty samples, got x {x.shape}, y {y.shape}")
    theta = np.asarray(theta, dtype=float)
    if theta.ndim < 2:
        theta = theta.reshape(theta.shape + (1,) * (2 - theta.ndim))
    if theta.shape[-2:] != (y.shape[1], x.shape[1]):
        raise DimensionError(f"theta {theta.shape[-2:]} does not map d1={x.shape[1]} to d2={y.shape[1]}")
    batch = theta.shape[:-2]
    flat = theta.reshape((-1,) + theta.shape[-2:])
    out = np.empty(flat.shape[0])
    yt = y.T
    for s in range(0, flat.shape[0], chunk):
        pred = flat[s:s + chunk] @ x.T
        out[s:s + chunk] = np.sqrt(((yt - pred) ** 2).sum(axis=1)).mean(axis=1)
    return float(out[0]) if not batch else out.reshape(batch)


def prediction_error(theta_hat, history, truth) -> float:
    """Mean Euclidean error of the recursive forecasts against ``truth`` (``L x d``)."""
    truth = np.asarray(truth, dtype=float)
    if truth.ndim == 1:
        truth = truth[:, None]
    L = truth.shape[0]
    if L < 1:
        raise DimensionError("truth must contain at least one row")
    pred = forecast(theta_hat, history, L)
    if pred.shape != truth.shape:
        raise DimensionError(f"forecast shape {pred.shape} differs from truth {truth.shape}")
    return float(np.linalg.norm(truth - pred, axis=1).mean())


def log10_error(e: float) -> float:
    """``log10(e)`` floored at -12 so perfect fits stay finite."""
    if e < 0:
        raise ParameterError(f"error must be non-negative, got {e}")
    if e < 1e-12:
        return LOG10_FLOOR
    return math.log10(e)


@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple
    count: int


def aggregate(values) -> Summary:
    """Box-plot statistics.

    Quartiles use linear interpolation between order statistics (the
    "type 7" rule, numpy's default).  Whiskers extend to the most extreme
    points within 1.5 IQR of the box; everything beyond is an outlier.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ParameterError("aggregate needs at least one value")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo) & (v <= hi)]
    outliers = tuple(sorted(float(a) for a in v[(v < lo) | (v > hi)]))
    return Summary(
        mean=float(math.fsum(v) / v.size),
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
        count=int(v.size),
    )


def _check_hill_input(samples, k):
    x = np.asarray(samples, dtype=float).ravel()
    if np.any(~(x > 0)):
        raise ParameterError("Hill estimation needs strictly positive samples")
    n = x.size
    if not 2 <= k < n:
        raise ParameterError(f"k must satisfy 2 <= k < n={n}, got {k}")
    return np.sort(x)


def hill_curve(samples, k_max: int) -> np.ndarray:
    """Hill estimates ``gamma(k)`` for ``k = 1..k_max`` (index ``k - 1``)."""
    xs = _check_hill_input(samples, k_max)
    top = np.log(xs[::-1][:k_max + 1])
    csum = np.cumsum(top[:k_max])
    k = np.arange(1, k_max + 1)
    return csum / k - top[1:k_max + 1]


def hill_estimator(samples, k: int) -> float:
    """Hill estimate from the ``k`` largest observations.

    ``gamma(k) = (1/k) sum_{i=1..k} log(X_(n-i+1) / X_(n-k))`` with ascending
    order statistics; ``1 / gamma(k)`` estimates the tail index.
    """
    xs = _check_hill_input(samples, k)
    n = xs.size
    return float(np.mean(np.log(xs[n - k:] / xs[n - k - 1])))


def hill_weighted(samples, k_bar: int) -> float:
    """Uniform average of ``gamma(k)`` over ``k = 2..k_bar``."""
    curve = hill_curve(samples, k_bar)
    return float(curve[1:].mean())


def hill_table(samples, k_max: int):
    """Rows ``(k, gamma_k, gamma_star_k, inv_gamma_star_k)`` for ``k = 2..k_max``."""
    curve = hill_curve(samples, k_max)
    rows = []
    run = 0.0
    for k in range(2, k_max + 1):
        run += curve[k - 1]
        g_star = run / (k - 1)
        rows.append((k, float(curve[k - 1]), g_star, 1.0 / g_star if g_star > 0 else math.inf))
    return rows


def delta_comparison(e_a: float, e_b: float) -> float:
    """Relative improvement ``(e_a - e_b) / e_a`` of method b over method a."""
    if e_a == 0:
        raise ZeroDivisionError("reference error e_a is zero")
    return (e_a - e_b) / e_a
