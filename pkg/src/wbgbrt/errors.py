"""Exception hierarchy shared by every module.

The CLI maps each family to a distinct exit status.
"""


class WbgbrtError(Exception):
    """Base class for all package errors."""


class ConfigError(WbgbrtError, ValueError):
    """Invalid configuration, parameters or shape contracts."""


class DataError(WbgbrtError, ValueError):
    """Unreadable, malformed or inconsistent input data."""


class NumericalError(WbgbrtError, ArithmeticError):
    """Non-finite values or degenerate denominators."""
