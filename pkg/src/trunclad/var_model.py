"""VAR(p) models: companion form, stability gate, simulation and forecasting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, ParameterError, UnstableModelError
from .rng import RngStream
from .tail_dist import NoiseSpec, sample

# 2**40 effective power; the Gelfand estimate then carries an error of about
# log(cond)/2**40, far inside the 1e-6 tolerance used by the stability gate.
GELFAND_DEPTH = 40
_MAX_SQUARINGS = 64
DEFAULT_BURN_IN = 5000


@dataclass(frozen=True)
class VarCoefficients:
    """Lag matrices ``phi = (Phi_1, ..., Phi_p)``, each ``d x d``."""

    phi: tuple

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float, copy=True) for m in self.phi)
        if not mats:
            raise DimensionError("a VAR model needs at least one lag matrix")
        d = mats[0].shape[0] if mats[0].ndim == 2 else -1
        for i, m in enumerate(mats):
            if m.shape != (d, d):
                raise DimensionError(f"Phi_{i + 1} has shape {m.shape}, expected ({d}, {d})")
            m.setflags(write=False)
        object.__setattr__(self, "phi", mats)

    @property
    def d(self) -> int:
        return self.phi[0].shape[0]

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def theta(self) -> np.ndarray:
        """Stacked parameter ``[Phi_1, ..., Phi_p]`` of shape ``(d, p*d)``."""
        return np.hstack(self.phi)

    @classmethod
    def from_theta(cls, theta, p: int) -> "VarCoefficients":
        theta = np.asarray(theta, dtype=float)
        d = theta.shape[0]
        if theta.ndim != 2 or theta.shape[1] != p * d:
            raise DimensionError(f"theta of shape {theta.shape} is not d x (p*d) with p={p}")
        return cls(tuple(theta[:, j * d:(j + 1) * d] for j in range(p)))


@dataclass
class TimeSeries:
    """Observations ``values[t] = Z_t`` (``n x d``) plus free-form labels."""

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise DimensionError(f"a time series needs shape (n >= 1, d), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError("time series contains non-finite entries")
        self.values = v

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


PRESETS = {
    "var1-sim": VarCoefficients((np.diag([0.6, -0.4, 0.1, 0.5, -0.2]),)),
    # Spectral radius ~1.068: the second coordinate has roots of
    # z**2 + 0.6 z - 0.5, one of which lies outside the unit circle.
    "var2-sim": VarCoefficients((
        np.diag([0.6, -0.6, 0.1, 0.5, -0.2]),
        np.diag([-0.3, 0.5, -0.2, -0.3, 0.1]),
    )),
    # Same two matrices with the lags exchanged (spectral radius ~0.939).
    "var2-sim-lagswap": VarCoefficients((
        np.diag([-0.3, 0.5, -0.2, -0.3, 0.1]),
        np.diag([0.6, -0.6, 0.1, 0.5, -0.2]),
    )),
}


def preset(name: str) -> VarCoefficients:
    try:
        return PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown VAR preset {name!r}; known: {sorted(PRESETS)}") from None


def default_theta0(d: int, p: int) -> np.ndarray:
    """``2 I`` for p = 1 and ``[I, ..., I]`` otherwise, the simulation start points."""
    if p == 1:
        return 2.0 * np.eye(d)
    return np.hstack([np.eye(d)] * p)


def companion(coeffs: VarCoefficients) -> np.ndarray:
    """Companion matrix: ``[Phi_1 ... Phi_p]`` on top, identities on the block subdiagonal."""
    d, p = coeffs.d, coeffs.p
    if p == 1:
        return np.array(coeffs.phi[0])
    psi = np.zeros((d * p, d * p))
    psi[:d, :] = coeffs.theta
    psi[d:, :-d] = np.eye(d * (p - 1))
    return psi


def _start_vector(n):
    # Fixed, generic direction so results are reproducible.
    i = np.arange(n, dtype=float)
    return 1.0 + 0.5 * np.sin(1.0 + 2.0 * i) + 0.25 * np.cos(3.0 * i * i)


def operator_norm(m, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on ``M^T M``.

    Iterates are multiplied by ``(M^T M)^(2^q)``, formed by renormalised
    repeated squaring until it stops changing (at most 64 squarings).  The
    leading eigenvector is unchanged while the convergence ratio is raised to
    the power ``2^q``, so nearly tied top singular values stay within the cap.
    Iteration stops once the eigen-residual ``|A v - s v|`` of ``A = M^T M``
    falls below ``tol * s``.  Raises ``NumericError`` (carrying the last
    estimate) if ``max_iter`` is reached first.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[None, :]
    if not np.all(np.isfinite(m)):
        raise NumericError("operator_norm of a non-finite matrix")
    # scale before forming the Gram matrix so huge or tiny entries cannot overflow
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    if scale == 0.0:
        return 0.0
    m = m / scale
    a = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    b = a / np.max(np.abs(a))
    for _ in range(_MAX_SQUARINGS):
        nb = b @ b
        nb /= np.max(np.abs(nb))
        done = np.max(np.abs(nb - b)) <= 1e-15
        b = nb
        if done:
            break
    v = _start_vector(a.shape[0])
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(max_iter):
        w = a @ v
        s = float(v @ w)
        if np.linalg.norm(w - s * v) <= tol * abs(s):
            return math.sqrt(s) * scale
        w = b @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v fell into the null space; restart from a rotated direction
            v = np.roll(_start_vector(a.shape[0]), 1)
            v /= np.linalg.norm(v)
            continue
        v = w / nw
    raise NumericError("power iteration did not converge", estimate=math.sqrt(max(s, 0.0)) * scale)


def spectral_radius(m, depth: int = GELFAND_DEPTH) -> float:
    """Spectral radius from the Gelfand sequence ``|M^(2^j)|^(1/2^j)``.

    The matrix is renormalised after every squaring and the scale is tracked
    in log space, so neither overflow nor underflow can occur.
    """
    b = np.array(m, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DimensionError(f"spectral_radius needs a square matrix, got {b.shape}")
    nb = operator_norm(b)
    if nb == 0.0:
        return 0.0
    log_norm = math.log(nb)
    b /= nb
    for j in range(1, depth + 1):
        b = b @ b
        nb = operator_norm(b)
        if nb == 0.0:
            return 0.0
        log_norm = 2.0 * log_norm + math.log(nb)
        b /= nb
    return math.exp(log_norm / 2.0**depth)


def is_stable(coeffs: VarCoefficients, rho_max: float = 0.99) -> bool:
    if not 0.0 < rho_max < 1.0:
        raise ParameterError(f"rho_max must lie in (0, 1), got {rho_max}")
    return spectral_radius(companion(coeffs)) <= rho_max


def simulate(coeffs: VarCoefficients, noise: NoiseSpec, n: int, burn_in: int = DEFAULT_BURN_IN,
             rng: RngStream | None = None) -> TimeSeries:
    """Simulate ``Z_{t+1} = sum_i Phi_i Z_{t+1-i} + eps_{t+1}`` from a zero history.

    The first ``burn_in`` points are discarded and ``n`` rows are returned.
    Innovation coordinates are i.i.d. draws from ``noise``; all ``(burn_in + n) * d``
    draws are taken from ``rng`` up front in row-major order.
    """
    if n < 1 or burn_in < 0:
        raise ParameterError(f"need n >= 1 and burn_in >= 0, got n={n}, burn_in={burn_in}")
    if not is_stable(coeffs, 1.0 - 1e-6):
        raise UnstableModelError(
            f"spectral radius {spectral_radius(companion(coeffs)):.6f} of the companion matrix is not below 1"
        )
    if rng is None:
        rng = RngStream(0)
    d, p = coeffs.d, coeffs.p
    total = burn_in + n
    eps = sample(noise, rng, (total, d))
    theta = coeffs.theta
    out = np.empty((total, d))
    lags = np.zeros(d * p)
    with np.errstate(over="ignore", invalid="ignore"):
        if p == 1:
            phi = coeffs.phi[0]
            z = np.zeros(d)
            for t in range(total):
                z = phi @ z + eps[t]
                out[t] = z
        else:
            for t in range(total):
                z = theta @ lags + eps[t]
                out[t] = z
                lags[d:] = lags[:-d]
                lags[:d] = z
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        step = int(np.argmax(bad))
        raise NumericError(f"simulated state became non-finite at step {step}", step=step)
    return TimeSeries(out[burn_in:], {"name": "simulated", "noise": noise.label()})


def lag_design(values, p: int):
    """Regression view of a series: ``Y[i] = Z_t`` and ``X[i] = (Z_{t-1}, ..., Z_{t-p})``."""
    z = np.asarray(values, dtype=float)
    n = z.shape[0]
    if n <= p:
        raise DimensionError(f"need more than p={p} rows, got {n}")
    x = np.hstack([z[p - j:n - j] for j in range(1, p + 1)])
    return x, z[p:]


def forecast(theta_hat, history, L: int) -> np.ndarray:
    """Recursive plug-in forecasts of the next ``L`` observations.

    Parameters
    ----------
    theta_hat : VarCoefficients or ndarray
        Coefficients, or the stacked ``d x (p*d)`` matrix.
    history : array_like
        At least ``p`` most recent observations, oldest first.
    L : int
        Forecast horizon.

    Returns
    -------
    ndarray of shape ``(L, d)``
    """
    theta = theta_hat.theta if isinstance(theta_hat, VarCoefficients) else np.asarray(theta_hat, float)
    hist = np.asarray(history, dtype=float)
    if hist.ndim == 1:
        hist = hist[:, None]
    d = theta.shape[0]
    p = theta.shape[1] // d
    if theta.shape[1] != p * d or hist.shape[1] != d:
        raise DimensionError(f"theta {theta.shape} and history {hist.shape} disagree")
    if hist.shape[0] < p:
        raise DimensionError(f"history has {hist.shape[0]} rows, need at least p={p}")
    lags = hist[::-1][:p].reshape(-1).copy()
    out = np.empty((L, d))
    for i in range(L):
        z = theta @ lags
        out[i] = z
        lags[d:] = lags[:-d]
        lags[:d] = z
    return out
