"""Executable versions of the theoretical objects: block partitions, tuning
formulas, rate and mixing bounds, the sparse toy model and Monte Carlo checks
of the exponential-moment inequalities behind the truncated estimator.

Nothing here invents the unknown universal constants of the risk bound; the
rate is returned "up to C".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ParameterError
from .losses import psi_alpha
from .rng import RngStream
from .tail_dist import NoiseSpec, sample
from .var_model import companion, operator_norm, spectral_radius

# Guards floor() against values like 2*log(e**b)/b = 1.9999999999999998.
_FLOOR_SNAP = 1e-9


@dataclass(frozen=True)
class BlockPartition:
    """Alternating big/small blocks of ``{1..n}`` followed by a tail.

    Index ranges are 1-based and inclusive, stored as ``(first, last)``; an
    empty tail is ``(n + 1, n)``.
    """

    n: int
    M: int
    m: int
    big: tuple
    small: tuple
    tail: tuple

    @property
    def K(self) -> int:
        return len(self.big)

    def indices(self):
        """Yield ``(kind, j, i)`` for every index, in increasing ``i``."""
        for j in range(self.K):
            for kind, blk in (("big", self.big[j]), ("small", self.small[j])):
                for i in range(blk[0], blk[1] + 1):
                    yield kind, j + 1, i
        for i in range(self.tail[0], self.tail[1] + 1):
            yield "tail", 0, i


def block_partition(n: int, M: int, m: int) -> BlockPartition:
    if not 1 <= m <= M <= n:
        raise ParameterError(f"need 1 <= m <= M <= n, got n={n}, M={M}, m={m}")
    K = n // (M + m)
    if K < 1:
        raise ParameterError(f"degenerate partition: M + m = {M + m} exceeds n = {n}")
    big, small = [], []
    for j in range(1, K + 1):
        start = (j - 1) * (M + m)
        big.append((start + 1, start + M))
        small.append((start + M + 1, j * (M + m)))
    return BlockPartition(n, M, m, tuple(big), tuple(small), (K * (M + m) + 1, n))


def theorem_blocks(n: int, beta: float):
    """``M = m = floor((2/beta) log n)`` and the resulting block count ``K``."""
    if n < 3 or not beta > 0:
        raise ParameterError(f"need n >= 3 and beta > 0, got n={n}, beta={beta}")
    M = math.floor(2.0 * math.log(n) / beta + _FLOOR_SNAP)
    if M < 1:
        raise ParameterError(f"block length floor((2/beta) log n) = {M} < 1")
    return M, M, block_partition(n, M, M).K


@dataclass(frozen=True)
class TheoryParams:
    """Sample size, mixing constants, dimensions and the moment/confidence levels."""

    n: int
    beta: float
    B: float = 1.0
    d1: int = 1
    d2: int = 1
    kappa: int = 1
    R: float = 1.0
    alpha: float = 2.0
    eps: float = 0.05

    def __post_init__(self):
        if self.n < 3:
            raise ParameterError(f"n must be >= 3, got {self.n}")
        for name in ("beta", "B", "R"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        for name in ("d1", "d2", "kappa"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if not 1.0 < self.alpha <= 2.0:
            raise ParameterError(f"alpha must lie in (1, 2], got {self.alpha}")
        if not 0.0 < self.eps < 0.5:
            raise ParameterError(f"eps must lie in (0, 1/2), got {self.eps}")

    @property
    def dim(self) -> float:
        return (self.d1 + self.d2) * self.kappa


@dataclass(frozen=True)
class Tuning:
    delta: float
    lam: float
    gamma: float
    conditions: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.conditions.values())

    @property
    def status(self) -> str:
        bad = [k for k, v in self.conditions.items() if not v]
        return "ok" if not bad else "warning: " + ", ".join(bad)


def tuning_params(p: TheoryParams) -> Tuning:
    """Tuning ``(delta, lambda, gamma)`` and its sample-size side conditions.

    Violated conditions do not raise; they show up in ``Tuning.conditions``.
    """
    logn = math.log(p.n)
    delta = 12.0 * logn / (p.n * p.beta)
    inner = 2.0 * delta * (math.log(16.0 / p.eps**2) + p.dim * math.log(6.0 * p.R / delta))
    lam = inner ** (1.0 / p.alpha) if inner > 0 else math.nan
    gamma = logn / p.n
    gap = 2.0 * logn - p.beta
    if gap > 0:
        lhs = math.log(p.beta) - math.log(p.n) - math.log(gap)
        rhs = math.log(p.eps / (2.0 * p.B)) + p.dim * math.log(delta / (6.0 * p.R))
        third = lhs <= rhs
    else:
        third = False
    conds = {
        "delta<1": delta < 1.0,
        "dim_log_n/n<1": p.dim * logn / p.n < 1.0,
        "mixing_budget": third,
    }
    return Tuning(delta, lam, gamma, conds)


def excess_risk_rate(p: TheoryParams) -> float:
    """``((log n/(beta n)) (|log eps| + (d1+d2) kappa log n))**((alpha-1)/alpha)``, up to C."""
    logn = math.log(p.n)
    base = logn / (p.beta * p.n) * (abs(math.log(p.eps)) + p.dim * logn)
    return base ** ((p.alpha - 1.0) / p.alpha)


def covering_log_bound(d1: int, d2: int, kappa: int, R: float, delta: float) -> float:
    """Log of the covering bound ``(6R/delta)**((d1+d2) kappa)`` for rank-``kappa`` balls."""
    if not delta > 0 or not R > 0:
        raise ParameterError("delta and R must be positive")
    if delta > 6.0 * R:
        raise ParameterError(f"delta={delta} exceeds 6R={6.0 * R}; the log bound would be negative")
    return (d1 + d2) * kappa * math.log(6.0 * R / delta)


def var_mixing_rate(rho: float) -> float:
    """Exponential beta-mixing rate ``|log rho| / 2`` of a stable VAR."""
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    return abs(math.log(rho)) / 2.0


def var_beta_bound(K: float, C_op: float, rho: float, alpha: float, n: int) -> float:
    """``K C^a / ((1-rho)^a (1-rho^a)) exp(-n a log(1/rho))`` with ``a = alpha/(1+alpha)``."""
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    if not 1.0 < alpha <= 2.0:
        raise ParameterError(f"alpha must lie in (1, 2], got {alpha}")
    if not (K > 0 and C_op > 0):
        raise ParameterError("K and C_op must be positive")
    a = alpha / (1.0 + alpha)
    log_pre = math.log(K) + a * math.log(C_op) - a * math.log1p(-rho) - math.log1p(-rho**a)
    return math.exp(log_pre - n * a * math.log(1.0 / rho))


def companion_constant(coeffs, k_max: int = 64) -> float:
    """Estimate of ``C_op`` in ``|Psi^k| <= C_op rho^k``: ``max_{k<=k_max} |Psi^k| / rho^k``."""
    psi = companion(coeffs)
    rho = spectral_radius(psi)
    if rho == 0.0:
        raise ParameterError("nilpotent companion matrix; C_op is not defined by this ratio")
    best, power = 1.0, np.eye(psi.shape[0])
    for k in range(1, k_max + 1):
        power = power @ psi / rho
        best = max(best, operator_norm(power))
    return best


# -- toy model ----------------------------------------------------------------

def toy_population_risk(theta: float, mu: float, rho_n: float) -> float:
    """``E|Y - theta|`` under the sparse symmetric toy law."""
    if not 1.0 < mu <= 2.0:
        raise ParameterError(f"mu must lie in (1, 2], got {mu}")
    if not 0.0 < rho_n < 1.0:
        raise ParameterError(f"rho_n must lie in (0, 1), got {rho_n}")
    t = abs(theta)
    if t < 1.0:
        return mu / (mu - 1.0) * (1.0 - rho_n) + rho_n * t
    return (1.0 - rho_n) * (t + t ** (1.0 - mu) / (mu - 1.0)) + rho_n * t


def _log_binom_cdf(k: int, n: int, p: float) -> float:
    """``log P(Bin(n, p) <= k)`` by a log-sum-exp over the pmf terms."""
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return -math.inf
    j = np.arange(k + 1, dtype=float)
    lg = math.lgamma(n + 1) - np.array([math.lgamma(a + 1) + math.lgamma(n - a + 1) for a in range(k + 1)])
    terms = lg + j * math.log(p) + (n - j) * math.log1p(-p)
    top = terms.max()
    return float(top + math.log(np.exp(terms - top).sum()))


def toy_lad_failure_prob(n: int) -> float:
    """``P(R(median) - R(0) >= 1/sqrt n)`` for the toy law with ``rho_n = 1/sqrt n``.

    Equals ``2 P(Bin(2m+1, (1+rho_n)/2) <= m)`` for ``n = 2m + 1``; independent of mu.
    """
    if n < 1 or n % 2 == 0:
        raise ParameterError(f"n must be a positive odd integer, got {n}")
    m = (n - 1) // 2
    p = (1.0 + 1.0 / math.sqrt(n)) / 2.0
    return 2.0 * math.exp(_log_binom_cdf(m, n, p))


def toy_failure_limit() -> float:
    """Large-``n`` limit ``2 Phi(-1)``."""
    return math.erfc(1.0 / math.sqrt(2.0))


def _toy_quantile(u, mu, rho):
    half = (1.0 - rho) / 2.0
    out = np.zeros_like(u)
    lo = u < half
    hi = u >= 1.0 - half
    out[lo] = -((u[lo] / half) ** (-1.0 / mu))
    out[hi] = ((1.0 - u[hi]) / half) ** (-1.0 / mu)
    return out


def toy_median_mc(n: int, trials: int, rng: RngStream, mu: float = 1.5, chunk: int = 500):
    """Monte Carlo frequency of ``|median| >= 1`` for ``n`` toy draws.

    Returns ``(frequency, binomial standard error)``.  Draws use the toy law's
    quantile function, one uniform per observation.
    """
    if n < 1 or n % 2 == 0:
        raise ParameterError(f"n must be a positive odd integer, got {n}")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rho = 1.0 / math.sqrt(n)
    m = (n - 1) // 2
    hits = 0
    done = 0
    while done < trials:
        c = min(chunk, trials - done)
        y = _toy_quantile(rng.uniform((c, n)), mu, rho)
        med = np.partition(y, m, axis=1)[:, m]
        hits += int(np.count_nonzero(np.abs(med) >= 1.0))
        done += c
    f = hits / trials
    return f, math.sqrt(max(f * (1.0 - f), 1e-300) / trials)


# -- exponential-moment inequalities ----------------------------------------------

@dataclass(frozen=True)
class LinearDataSpec:
    """i.i.d. pairs ``Y = theta_true X + eps`` with standard normal ``X`` in ``R^d1``
    and ``eps`` having i.i.d. coordinates from ``noise``."""

    theta_true: np.ndarray
    noise: NoiseSpec

    def draw(self, rng: RngStream, size: int):
        t = np.atleast_2d(np.asarray(self.theta_true, dtype=float))
        x = rng.normal((size, t.shape[1]))
        y = x @ t.T + sample(self.noise, rng, (size, t.shape[0]))
        return x, y


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def catoni_mgf_check(theta, data: LinearDataSpec, lam: float, alpha: float, trials: int,
                     rng: RngStream, block: int = 1, delta: float = 0.1, z: float = 5.0) -> dict:
    """Monte Carlo check of the upper and lower exponential-moment inequalities.

    ``lhs_upper`` estimates ``E exp{mean_I psi(lam r_i)}`` and ``rhs_upper`` is
    ``exp{lam R_1 + alpha lam^alpha R_alpha}``; ``lhs_lower`` estimates
    ``E exp{-mean_I psi(lam r_i - lam delta |X_i|)}`` against
    ``exp{lam[-R_1 + delta E|X| + (2 lam)^(alpha-1)/alpha (R_alpha + delta^alpha E|X|^alpha)]}``,
    where ``r = |Y - theta X|``.  Moments on the right are estimated from an
    independent sample of the same size, so both sides carry a standard error.
    A side passes when ``lhs - rhs <= z * sqrt(se_lhs**2 + se_rhs**2)``.
    """
    if trials < 2:
        raise ParameterError("trials must be >= 2")
    if block < 1:
        raise ParameterError("block size must be >= 1")
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    x, y = data.draw(rng, trials * block)
    r = np.linalg.norm(y - x @ theta.T, axis=1)
    nx = np.linalg.norm(x, axis=1)
    up = np.exp(psi_alpha(lam * r, alpha).reshape(trials, block).mean(axis=1))
    lo = np.exp(-psi_alpha(lam * r - lam * delta * nx, alpha).reshape(trials, block).mean(axis=1))
    lhs_u, se_lu = _mean_se(up)
    lhs_l, se_ll = _mean_se(lo)

    x2, y2 = data.draw(rng, trials * block)
    r2 = np.linalg.norm(y2 - x2 @ theta.T, axis=1)
    nx2 = np.linalg.norm(x2, axis=1)
    # exponents are linear in the moments, so their standard error is that of a per-sample mean
    eu = lam * r2 + alpha * lam**alpha * r2**alpha
    c = (2.0 * lam) ** (alpha - 1.0) / alpha
    el = lam * (-r2 + delta * nx2 + c * (r2**alpha + delta**alpha * nx2**alpha))
    mu_u, se_eu = _mean_se(eu)
    mu_l, se_el = _mean_se(el)
    rhs_u = math.exp(mu_u)
    rhs_l = math.exp(mu_l)
    se_ru = rhs_u * se_eu
    se_rl = rhs_l * se_el
    vals = (lhs_u, lhs_l, rhs_u, rhs_l, se_lu, se_ll, se_ru, se_rl)
    if not all(math.isfinite(v) for v in vals):
        raise NumericError("non-finite Monte Carlo accumulator in catoni_mgf_check")
    pass_u = lhs_u - rhs_u <= z * math.hypot(se_lu, se_ru)
    pass_l = lhs_l - rhs_l <= z * math.hypot(se_ll, se_rl)
    return {
        "lhs_upper": lhs_u, "rhs_upper": rhs_u, "se_upper": math.hypot(se_lu, se_ru),
        "lhs_lower": lhs_l, "rhs_lower": rhs_l, "se_lower": math.hypot(se_ll, se_rl),
        "pass_upper": pass_u, "pass_lower": pass_l, "pass": pass_u and pass_l,
    }


def bound_rows(ns, base: TheoryParams):
    """Rows ``(n, delta, lambda, gamma, rate)`` for each sample size in ``ns``."""
    rows = []
    for n in ns:
        p = TheoryParams(n=int(n), beta=base.beta, B=base.B, d1=base.d1, d2=base.d2, kappa=base.kappa,
                         R=base.R, alpha=base.alpha, eps=base.eps)
        t = tuning_params(p)
        rows.append((int(n), t.delta, t.lam, t.gamma, excess_risk_rate(p)))
    return rows
