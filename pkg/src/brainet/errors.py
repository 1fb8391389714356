"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4, I/O failures -> 5.
"""


class BrainetError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(BrainetError):
    """Invalid configuration file, flag, or schema definition."""


class DataError(BrainetError):
    """Input data violates a documented precondition."""


class NumericError(BrainetError):
    """A numeric procedure failed (divergence, separation, singularity)."""
