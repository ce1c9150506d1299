"""Exception types raised across the package."""


class GlamError(Exception):
    """Base class for all package errors."""


class DomainError(GlamError, ValueError):
    """An argument lies outside the domain of an operation."""


class OutsideSupportError(DomainError):
    """A value lies outside the support of a distribution."""


class NonexistentMomentError(DomainError):
    """A requested moment does not exist because the tails are too heavy."""


class UnsupportedError(GlamError, ValueError):
    """A feature outside what this package implements was requested."""


class ConvergenceError(GlamError, RuntimeError):
    """An iterative numerical procedure failed to converge."""


class UnderdeterminedError(GlamError, ValueError):
    """A regression problem has no more data points than unknowns."""


class ConditioningError(GlamError, ValueError):
    """A design matrix is rank deficient or too ill-conditioned to solve."""


class DegenerateDataError(GlamError, ValueError):
    """Data carry no spread, so no distribution can be fitted."""


class FeasibilityError(GlamError, RuntimeError):
    """No feasible starting point is available for a constrained search."""
