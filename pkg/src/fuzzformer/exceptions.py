"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1 (usage),
DataError -> 2, NumericError -> 3.
"""


class FuzzformerError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FuzzformerError):
    """Invalid run configuration or incompatible component settings."""


class DataError(FuzzformerError):
    """Malformed, missing, or inconsistent input data."""


class FetchError(DataError):
    """HTTP retrieval of a series failed."""


class NumericError(FuzzformerError):
    """Numerical failure during computation."""


class ShapeError(NumericError):
    """Operands with incompatible shapes reached a tensor operation."""


class NonFiniteError(NumericError):
    """NaN or Inf encountered during a computation."""


class PositiveDefinitenessError(NumericError):
    """A covariance (or pooled covariance) lost positive definiteness."""


class ArimaFitError(NumericError):
    """Per-window ARIMA estimation failed (rank-deficient regression)."""
