"""Exception types shared across the package.

Two families matter to callers: data errors (bad or insufficient input)
and numerical errors (a computation that cannot proceed).  The command
line interface maps them to distinct exit codes.
"""


class MortcastError(Exception):
    """Base class for all package-specific errors."""


class DataError(MortcastError):
    """Invalid, malformed, or insufficient input data."""


class NumericalError(MortcastError):
    """A numerical procedure failed or the inputs make it ill posed."""


class ZeroCountError(DataError):
    """A death count is zero or negative where a log is required."""


class ZeroVarianceError(NumericalError):
    """A series is constant where a nonzero variance is required."""


class DegenerateCovarianceError(NumericalError):
    """Covariance matrix has no usable spectrum (all eigenvalues ~ 0)."""


class FitFailureError(NumericalError):
    """Model estimation failed to produce finite parameters."""


class InsufficientHistoryError(DataError):
    """Too few observations for the requested operation."""


class HorizonExceededError(DataError):
    """Requested horizon extends past the available forecast span."""


class ContractBoundError(DataError):
    """Annuity contract extends past the maximum attainable age."""
