"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, everything derived
from ``NumericError`` -> 3.
"""


class CatlinError(Exception):
    """Base class for all package errors."""


class ConfigError(CatlinError):
    """Invalid user configuration (unknown domain, bad field values, ...)."""


class PreconditionError(CatlinError, ValueError):
    """An operation was called outside its documented preconditions."""


class OutOfChartError(PreconditionError):
    """Point lies outside the domain's bounding box."""


class DomainMembershipError(PreconditionError):
    """Point is not in the open domain."""


class CollarError(PreconditionError):
    """Point lies outside the boundary collar where projection is unique."""


class ChartError(PreconditionError):
    """The normal derivative of the chart's defining function is too small."""


class CapabilityError(CatlinError):
    """Requested derivative order exceeds what the jet oracle provides."""


class SamplingError(CatlinError):
    """Rejection sampling could not produce the requested points."""


class CurveValidityError(PreconditionError):
    """Polyline leaves the domain or has degenerate parameters."""


class NumericError(CatlinError, ArithmeticError):
    """A numerical procedure failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResourceError(NumericError):
    """A discretisation would exceed the configured memory budget."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ReachabilityError(NumericError):
    """Graph endpoints lie in different connected components."""
