"""Exception types shared across the package."""


class SparsePrecError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(SparsePrecError, ValueError):
    """A matrix expected to be positive definite is not."""


class NotConverged(SparsePrecError, RuntimeError):
    """An iterative routine hit its iteration cap."""


class InvalidParameter(SparsePrecError, ValueError):
    pass


class DimensionMismatch(SparsePrecError, ValueError):
    pass


class NonPositiveDiagonal(SparsePrecError, ValueError):
    """Sample covariance has a zero or negative diagonal entry."""


class SingularGammaSS(SparsePrecError, ValueError):
    pass


class IncoherenceFails(SparsePrecError, ValueError):
    """Raised by threshold formulas that need a positive incoherence margin."""
