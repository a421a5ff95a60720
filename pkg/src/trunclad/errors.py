"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter lies outside its admissible range."""


class DimensionError(ValueError):
    """Array shapes do not agree."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value or failed to converge.

    ``step`` is the iteration index at which the failure was detected (if any)
    and ``estimate`` carries the last usable value (if any).
    """

    def __init__(self, message, step=None, estimate=None):
        super().__init__(message)
        self.step = step
        self.estimate = estimate


class UnstableModelError(ParameterError):
    """VAR coefficients violate the spectral-radius gate."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""
