"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ConfigError/DomainError -> 1,
NumericError -> 2, DataError -> 3.
"""


class EfdoseError(Exception):
    """Base class for all package errors."""


class ConfigError(EfdoseError):
    """Invalid configuration: bad field values, incompatible dimensions."""


class DomainError(EfdoseError):
    """Mathematical input outside the admissible domain (theta, mu, dose)."""


class DataError(EfdoseError):
    """Dataset content violates its contract (support, shape, format)."""


class NumericError(EfdoseError):
    """Non-finite value produced where a finite one is required."""
