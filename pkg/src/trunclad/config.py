"""Experiment configuration: a sectioned TOML file resolved into typed settings.

Example::

    [model]
    preset = "var1-sim"          # or: d = 2, p = 1, phi = [[[0.5, 0.0], [0.0, 0.3]]]

    [noise]
    law = "pareto"
    shape = 1.8
    centered = true

    [run]
    replications = 200
    n_train = 800
    burn_in = 5000
    L = 10
    master_seed = 20240101
    threads = 1
    risk_stride = 1

    [sgd]
    eta = 0.01
    steps = 800
    gamma = 0.01
    theta0 = "default"           # "default", "zeros" or "truth"

    [losses]
    psi_alphas = [1.2, 1.4, 1.6, 1.7]
    lam = 0.035
    huber_tau = 0.5
    huber_sigma = 1.0
"""
from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ParameterError
from .losses import LossSpec
from .rng import MASK64
from .tail_dist import NoiseSpec
from .var_model import PRESETS, VarCoefficients, default_theta0

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# psi_alpha exponents used with each noise shape in the simulation study
ALPHA_GRID = {
    1.2: (1.05, 1.1, 1.15, 1.18),
    1.5: (1.1, 1.2, 1.3, 1.4),
    1.8: (1.2, 1.4, 1.6, 1.7),
}
THETA0_MODES = ("default", "zeros", "truth")


@dataclass
class ModelSection:
    preset: str | None = "var1-sim"
    phi: list | None = None

    def coefficients(self) -> VarCoefficients:
        if self.phi is not None:
            return VarCoefficients(tuple(np.asarray(m, dtype=float) for m in self.phi))
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown model preset {self.preset!r}; known: {sorted(PRESETS)}")
        return PRESETS[self.preset]

    @property
    def name(self) -> str:
        return self.preset if self.phi is None else "custom"


@dataclass
class NoiseSection:
    law: str = "pareto"
    shape: float | None = 1.8
    centered: bool = True
    rho: float = 0.0

    def spec(self) -> NoiseSpec:
        return NoiseSpec(self.law, None if self.law == "degenerate" else self.shape, self.rho, self.centered)


@dataclass
class RunSection:
    replications: int = 200
    n_train: int = 800
    burn_in: int = 5000
    L: int = 10
    master_seed: int = 20240101
    threads: int = 1
    risk_stride: int = 1


@dataclass
class SgdSection:
    eta: float = 0.01
    steps: int = 800
    gamma: float = 0.01
    theta0: str = "default"
    c0: float | None = None
    c0_stride: int = 1


@dataclass
class LossSection:
    psi_alphas: list = field(default_factory=lambda: [1.2, 1.4, 1.6, 1.7])
    lam: float = 0.035
    huber_tau: float = 0.5
    huber_sigma: float = 1.0
    lad: bool = True
    huber: bool = True

    def specs(self) -> list[LossSpec]:
        out = [LossSpec.psi(a, self.lam) for a in self.psi_alphas]
        if self.lad:
            out.append(LossSpec.absolute())
        if self.huber:
            out.append(LossSpec.huber_loss(self.huber_tau, self.huber_sigma))
        return out


@dataclass
class RealSection:
    path: str | None = None
    transform: str = "none"
    columns: list | None = None
    p: int = 1
    n_train: int = 190
    L: int = 10
    n_iter: int = 10_000
    eta: float = 0.08
    gamma: float = 0.5
    c0: float | None = 0.01
    c0_stride: int = 1
    checkpoints: list = field(default_factory=lambda: list(range(1000, 10_001, 500)))
    hill_k: int = 160


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    run: RunSection = field(default_factory=RunSection)
    sgd: SgdSection = field(default_factory=SgdSection)
    losses: LossSection = field(default_factory=LossSection)
    real: RealSection = field(default_factory=RealSection)

    def validate(self) -> "ExperimentConfig":
        r = self.run
        if r.replications < 1:
            raise ConfigError("run.replications must be >= 1")
        if r.n_train < 1 or r.burn_in < 0 or r.L < 0:
            raise ConfigError("run.n_train must be >= 1, burn_in and L >= 0")
        if r.threads < 1 or r.risk_stride < 1:
            raise ConfigError("run.threads and run.risk_stride must be >= 1")
        if not 0 <= r.master_seed <= MASK64:
            raise ConfigError("run.master_seed must be an unsigned 64-bit integer")
        if self.sgd.steps > r.n_train:
            raise ConfigError(f"sgd.steps={self.sgd.steps} exceeds the {r.n_train} training pairs")
        if self.sgd.theta0 not in THETA0_MODES:
            raise ConfigError(f"sgd.theta0 must be one of {THETA0_MODES}")
        try:
            noise = self.noise.spec()
            self.model.coefficients()
            losses = self.losses.specs()
        except (ParameterError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not losses:
            raise ConfigError("no losses configured")
        if noise.shape is not None:
            for ls in losses:
                if ls.kind == "psi_alpha" and not ls.alpha < noise.shape:
                    raise ConfigError(f"alpha={ls.alpha} must be below the noise shape {noise.shape}")
        if not 0 < self.sgd.eta <= 1:
            raise ConfigError("sgd.eta must lie in (0, 1]")
        if self.sgd.gamma < 0:
            raise ConfigError("sgd.gamma must be >= 0")
        if self.sgd.c0 is not None and not self.sgd.c0 > 0:
            raise ConfigError("sgd.c0 must be positive")
        return self

    def theta0(self) -> np.ndarray:
        coeffs = self.model.coefficients()
        if self.sgd.theta0 == "zeros":
            return np.zeros((coeffs.d, coeffs.d * coeffs.p))
        if self.sgd.theta0 == "truth":
            return coeffs.theta.copy()
        return default_theta0(coeffs.d, coeffs.p)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "model": ModelSection,
    "noise": NoiseSection,
    "run": RunSection,
    "sgd": SgdSection,
    "losses": LossSection,
    "real": RealSection,
}


def from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from nested mappings; unknown keys are errors."""
    kwargs = {}
    for name, raw in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
        cls = _SECTIONS[name]
        known = cls.__dataclass_fields__
        for key in raw:
            if key not in known:
                raise ConfigError(f"unknown key {name}.{key}")
        raw = dict(raw)
        if name == "model" and "phi" in raw and "preset" not in raw:
            raw["preset"] = None
        try:
            kwargs[name] = cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad section [{name}]: {exc}") from exc
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return from_dict(data)


def scenario_config(model: str, law: str, shape: float, *, replications=200, master_seed=20240101,
                    threads=1, risk_stride=1, steps=800, L=10) -> ExperimentConfig:
    """Simulation-study settings for one (model, noise, shape) cell.

    VAR(1) starts from ``2 I`` with ``gamma = 0.01``; VAR(2) from ``[I, I]`` with
    ``gamma = 0.005``.  Both use ``eta = 0.01``, ``lambda = 0.035`` and the Huber
    pair ``tau = 0.5``, ``sigma = 1``.
    """
    if shape not in ALPHA_GRID:
        raise ConfigError(f"no alpha grid for shape {shape}; known: {sorted(ALPHA_GRID)}")
    gamma = 0.005 if PRESETS[model].p == 2 else 0.01
    cfg = ExperimentConfig(
        model=ModelSection(preset=model),
        noise=NoiseSection(law=law, shape=shape, centered=True),
        run=RunSection(replications=replications, n_train=steps, master_seed=master_seed, threads=threads,
                       risk_stride=risk_stride, L=L),
        sgd=SgdSection(eta=0.01, steps=steps, gamma=gamma),
        losses=LossSection(psi_alphas=list(ALPHA_GRID[shape])),
    )
    return cfg.validate()


def with_overrides(cfg: ExperimentConfig, *, seed=None, threads=None) -> ExperimentConfig:
    out = copy.deepcopy(cfg)
    if seed is not None:
        out.run.master_seed = int(seed)
    if threads is not None:
        out.run.threads = int(threads)
    return out.validate()
