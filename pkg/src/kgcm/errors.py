"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, TrainingDiverged -> 3.
"""


class KgcmError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KgcmError):
    """Invalid, unknown, or missing configuration."""


class DataError(KgcmError):
    """Malformed or inconsistent input data (missing column, date gap, ...)."""


class TrainingDiverged(KgcmError):
    """Training produced a non-finite loss."""
