"""Per-sample losses on the Euclidean residual norm, their subgradients, and
the entrywise l1 penalty.

Every loss here is a function of ``r = |y - theta x|`` only, so its gradient in
``theta`` is ``-w(r) (e / r) x^T`` with ``e = y - theta x`` and a scalar weight
``w``; :func:`residual_weight` returns that weight.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError

KINDS = ("psi_alpha", "huber", "absolute")


def psi_alpha(r, alpha):
    """Catoni-type influence function, odd extension of ``log(1 + r + r**alpha / alpha)``."""
    r = np.asarray(r, dtype=float)
    a = np.abs(r)
    out = np.sign(r) * np.log1p(a + a**alpha / alpha)
    return out[()] if out.ndim == 0 else out


def psi_alpha_deriv(r, alpha):
    a = np.abs(np.asarray(r, dtype=float))
    out = (1.0 + a ** (alpha - 1.0)) / (1.0 + a + a**alpha / alpha)
    out = np.where(a == 0.0, 1.0, out)
    return out[()] if out.ndim == 0 else out


def huber(r, tau):
    """``r**2 / 2`` inside ``[-tau, tau]``, ``tau |r| - tau**2 / 2`` outside."""
    a = np.abs(np.asarray(r, dtype=float))
    out = np.where(a <= tau, 0.5 * a * a, tau * a - 0.5 * tau * tau)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class LossSpec:
    """One of the three objectives and its tuning scalars.

    ``psi_alpha`` uses ``alpha`` and ``lam``; ``huber`` uses ``tau`` and
    ``sigma``; ``absolute`` has no parameters.
    """

    kind: str
    alpha: float = 2.0
    lam: float = 1.0
    tau: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown loss {self.kind!r}; expected one of {KINDS}")
        if self.kind == "psi_alpha":
            if not 1.0 < self.alpha <= 2.0:
                raise ParameterError(f"alpha must lie in (1, 2], got {self.alpha}")
            if not self.lam > 0:
                raise ParameterError(f"lambda must be positive, got {self.lam}")
        if self.kind == "huber" and not (self.tau > 0 and self.sigma > 0):
            raise ParameterError(f"tau and sigma must be positive, got {self.tau}, {self.sigma}")

    @classmethod
    def psi(cls, alpha, lam):
        return cls("psi_alpha", alpha=float(alpha), lam=float(lam))

    @classmethod
    def huber_loss(cls, tau, sigma):
        return cls("huber", tau=float(tau), sigma=float(sigma))

    @classmethod
    def absolute(cls):
        return cls("absolute")

    @property
    def name(self) -> str:
        return {"psi_alpha": "psi_alpha", "huber": "huber", "absolute": "lad"}[self.kind]

    def label(self) -> str:
        if self.kind == "psi_alpha":
            return f"psi_alpha(alpha={self.alpha:g}, lambda={self.lam:g})"
        if self.kind == "huber":
            return f"huber(tau={self.tau:g}, sigma={self.sigma:g})"
        return "lad"


@dataclass(frozen=True)
class PenaltySpec:
    gamma: float = 0.0
    active: bool = True

    def __post_init__(self):
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")

    @property
    def effective(self) -> float:
        return self.gamma if self.active else 0.0


def loss_of_residual(spec: LossSpec, r):
    """Loss value as a function of the residual norm ``r >= 0``."""
    if spec.kind == "psi_alpha":
        return psi_alpha(spec.lam * np.asarray(r, float), spec.alpha) / spec.lam
    if spec.kind == "huber":
        return huber(spec.sigma * np.asarray(r, float), spec.tau) / spec.sigma
    return np.asarray(r, dtype=float)[()]


def residual_weight(spec: LossSpec, r):
    """Derivative of :func:`loss_of_residual` in ``r``."""
    r = np.asarray(r, dtype=float)
    if spec.kind == "psi_alpha":
        return psi_alpha_deriv(spec.lam * r, spec.alpha)
    if spec.kind == "huber":
        return np.minimum(spec.sigma * r, spec.tau)[()]
    return np.ones_like(r)[()]


def _residual(y, x, theta):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if theta.shape != (y.shape[0], x.shape[0]):
        raise DimensionError(f"theta {theta.shape} does not map x {x.shape} to y {y.shape}")
    return y - theta @ x, x


def sample_loss(spec: LossSpec, y, x, theta) -> float:
    e, _ = _residual(y, x, theta)
    return float(loss_of_residual(spec, np.linalg.norm(e)))


def sample_subgradient(spec: LossSpec, y, x, theta) -> np.ndarray:
    """Gradient in ``theta`` of the per-sample loss; zero when the residual vanishes."""
    e, x = _residual(y, x, theta)
    r = float(np.linalg.norm(e))
    if r == 0.0:
        return np.zeros((e.shape[0], x.shape[0]))
    w = float(residual_weight(spec, r))
    return np.outer(-(w / r) * e, x)


def penalty_value(theta) -> float:
    """Entrywise l1 norm ``sum |theta_ij|``."""
    return float(np.abs(np.asarray(theta, dtype=float)).sum())


def penalty_subgradient(theta, gamma: float) -> np.ndarray:
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma}")
    return gamma * np.sign(np.asarray(theta, dtype=float))
