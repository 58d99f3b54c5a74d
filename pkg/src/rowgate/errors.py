"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration and data problems exit
with 1, numerical failures (divergence, failed gradient verification)
exit with 2.
"""


class RowGateError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(RowGateError):
    """Operands have incompatible shapes."""


class ConfigError(RowGateError):
    """Invalid configuration value or combination."""


class DataError(RowGateError):
    """Malformed or unreadable input data."""


class NumericalError(RowGateError):
    """A computation produced numerically unusable results."""


class DivergenceError(NumericalError):
    """Training produced a non-finite loss."""
