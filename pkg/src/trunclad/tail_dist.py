"""Heavy-tailed innovation laws: Pareto, Frechet, the sparse symmetric toy law
and a point mass at zero.

All samplers go through the inverse CDF so that a stream of uniforms maps to a
fixed stream of draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .rng import RngStream

LAWS = ("pareto", "frechet", "toy_sparse", "degenerate")

# Lanczos approximation, g = 7, nine terms (~15 significant digits on x > 0).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lanczos_gamma(x: float) -> float:
    """Gamma function via the Lanczos series, with reflection below 1/2."""
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * lanczos_gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


@dataclass(frozen=True)
class NoiseSpec:
    """Innovation law.

    ``shape`` is the Pareto/toy exponent mu or the Frechet exponent nu; ``rho``
    is the atom mass of the toy law.  With ``centered=True`` the analytic mean
    is subtracted from every draw.
    """

    law: str
    shape: float | None = None
    rho: float = 0.0
    centered: bool = False

    def __post_init__(self):
        if self.law not in LAWS:
            raise ParameterError(f"unknown noise law {self.law!r}; expected one of {LAWS}")
        if self.law != "degenerate":
            if self.shape is None or not self.shape > 1.0:
                raise ParameterError(f"{self.law} shape must be > 1 (finite mean), got {self.shape}")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [0, 1], got {self.rho}")

    @classmethod
    def pareto(cls, mu, centered=False):
        return cls("pareto", float(mu), centered=centered)

    @classmethod
    def frechet(cls, nu, centered=False):
        return cls("frechet", float(nu), centered=centered)

    @classmethod
    def toy_sparse(cls, mu, rho, centered=False):
        return cls("toy_sparse", float(mu), rho=float(rho), centered=centered)

    @classmethod
    def degenerate(cls):
        return cls("degenerate")

    def label(self) -> str:
        if self.law == "degenerate":
            return "degenerate"
        return f"{self.law}({self.shape:g})"


def analytic_mean(spec: NoiseSpec) -> float:
    """Mean of the uncentered law."""
    if spec.law == "pareto":
        return spec.shape / (spec.shape - 1.0)
    if spec.law == "frechet":
        return lanczos_gamma(1.0 - 1.0 / spec.shape)
    return 0.0


def atom_mass(spec: NoiseSpec) -> float:
    """Probability of the point mass at 0 (before centering)."""
    if spec.law == "toy_sparse":
        return spec.rho
    if spec.law == "degenerate":
        return 1.0
    return 0.0


def density(spec: NoiseSpec, x):
    """Density of the uncentered law at ``x``; the atom of the toy law is excluded."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if spec.law == "pareto":
        m = x >= 1.0
        out[m] = spec.shape * x[m] ** (-1.0 - spec.shape)
    elif spec.law == "frechet":
        m = x > 0.0
        lx = np.log(x[m])
        out[m] = np.exp(math.log(spec.shape) - (1.0 + spec.shape) * lx - np.exp(-spec.shape * lx))
    elif spec.law == "toy_sparse":
        ax = np.abs(x)
        m = ax >= 1.0
        out[m] = (1.0 - spec.rho) * spec.shape / (2.0 * ax[m] ** (spec.shape + 1.0))
    return out[()] if out.ndim == 0 else out


def cdf(spec: NoiseSpec, x):
    """Distribution function of the uncentered law."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    mu = spec.shape
    if spec.law == "pareto":
        m = x >= 1.0
        out[m] = 1.0 - x[m] ** (-mu)
    elif spec.law == "frechet":
        m = x > 0.0
        out[m] = np.exp(-x[m] ** (-mu))
    elif spec.law == "toy_sparse":
        half = (1.0 - spec.rho) / 2.0
        tail = half * np.maximum(np.abs(x), 1.0) ** (-mu)
        out = np.where(x < -1.0, tail, half)
        out = np.where(x >= 0.0, 1.0 - half, out)
        out = np.where(x >= 1.0, 1.0 - tail, out)
    else:
        out = (x >= 0.0).astype(float)
    return out[()] if out.ndim == 0 else out


def inverse_cdf(spec: NoiseSpec, u):
    """Quantile transform of the Pareto or Frechet law (uncentered)."""
    u = np.asarray(u, dtype=float)
    if spec.law == "pareto":
        out = (1.0 - u) ** (-1.0 / spec.shape)
    elif spec.law == "frechet":
        with np.errstate(divide="ignore"):
            out = (-np.log(u)) ** (-1.0 / spec.shape)
    else:
        raise ParameterError(f"inverse_cdf is defined for pareto and frechet, not {spec.law}")
    return out[()] if out.ndim == 0 else out


def sample(spec: NoiseSpec, rng: RngStream, size=None):
    """Draw from ``spec``.

    Parameters
    ----------
    spec : NoiseSpec
    rng : RngStream
    size : int or tuple, optional
        Output shape; a Python float is returned when omitted.

    Notes
    -----
    Pareto uses ``(1 - U)**(-1/mu)``, Frechet ``(-log U)**(-1/nu)``.  The toy law
    consumes three uniforms per draw (atom, sign, magnitude) in that order.
    """
    shape = () if size is None else (size if isinstance(size, tuple) else (int(size),))
    n = int(np.prod(shape)) if shape else 1
    if spec.law in ("pareto", "frechet"):
        out = inverse_cdf(spec, rng.uniform(n))
    elif spec.law == "toy_sparse":
        u = rng.uniform((n, 3))
        sign = np.where(u[:, 1] < 0.5, -1.0, 1.0)
        out = np.where(u[:, 0] < spec.rho, 0.0, sign * (1.0 - u[:, 2]) ** (-1.0 / spec.shape))
    else:
        out = np.zeros(n)
    if spec.centered:
        out = out - analytic_mean(spec)
    if size is None:
        return float(out[0])
    return out.reshape(shape)
