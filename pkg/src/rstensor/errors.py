"""Exception types shared across the package.

Each maps to a CLI exit code: ConfigError 2, NumericError 3, DataError 4.
"""


class ConfigError(ValueError):
    """Invalid configuration or argument values."""


class NumericError(ArithmeticError):
    """A numerical routine failed to meet its contract (non-convergence,
    tolerance not reached, non-finite values)."""


class DataError(IOError):
    """Malformed or missing input data."""
