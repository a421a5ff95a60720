"""Truncated least-absolute-deviation regression for heavy-tailed time series.

The package provides heavy-tailed innovation laws, VAR simulation, the
truncated, Huber and absolute losses with a stochastic subgradient solver,
evaluation metrics including the Hill estimator, executable forms of the
theoretical bounds, and an experiment harness with a command-line interface.
"""
from .errors import ConfigError, DimensionError, NumericError, ParameterError, UnstableModelError
from .losses import LossSpec, PenaltySpec
from .optimizer import FitTrajectory, SgdConfig, fit_all_three, sgd_fit, sgd_step
from .rng import RngStream, splitmix64
from .tail_dist import NoiseSpec
from .var_model import TimeSeries, VarCoefficients, lag_design, preset, simulate

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DimensionError",
    "FitTrajectory",
    "LossSpec",
    "NoiseSpec",
    "NumericError",
    "ParameterError",
    "PenaltySpec",
    "RngStream",
    "SgdConfig",
    "TimeSeries",
    "UnstableModelError",
    "VarCoefficients",
    "fit_all_three",
    "lag_design",
    "preset",
    "sgd_fit",
    "sgd_step",
    "simulate",
    "splitmix64",
]
