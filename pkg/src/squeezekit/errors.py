"""Shared exception types."""


class SqueezekitError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(SqueezekitError, ValueError):
    """An argument violates a documented precondition."""


class CapacityError(SqueezekitError):
    """Requested register size exceeds the configured amplitude-array cap."""


class DegenerateBlochVectorError(SqueezekitError):
    """Squeezing parameter undefined because |<J>| is numerically zero."""


class UnstableEstimateError(SqueezekitError):
    """Too many degenerate shot estimates to report a stable figure."""


class NumericalInstabilityError(SqueezekitError):
    """A numerical self-check failed (projector idempotence)."""
