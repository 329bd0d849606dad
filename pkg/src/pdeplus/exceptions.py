"""Exception types shared across the package."""


class PdePlusError(Exception):
    """Base class for all pdeplus errors."""


class InvalidInputError(PdePlusError, ValueError):
    """Raised when an argument violates a documented precondition."""


class DegenerateColumnError(InvalidInputError):
    """Raised when a covariate column has zero variance and cannot be scaled."""


class SingularMetricError(PdePlusError):
    """Raised when the metric matrix of a generalized eigenproblem is not positive definite."""


class FlatLinkError(PdePlusError):
    """Raised when every local slope vanishes and the direction update is undefined."""


class CollinearBasisError(PdePlusError):
    """Raised when the temporal basis columns are rank deficient."""


class UnderdeterminedVariogramError(PdePlusError):
    """Raised when too few populated variogram cells exist to fit a covariance model."""


class ConditioningError(PdePlusError):
    """Raised when a kriging covariance matrix cannot be factorized; a nugget floor usually fixes it."""
