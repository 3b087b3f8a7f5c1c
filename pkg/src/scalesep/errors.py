"""Exception types shared across the package."""

from __future__ import annotations


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge."""


class ConvergenceError(NumericalError):
    """Iterative solver hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, last_solution=None):
        super().__init__(message)
        self.last_solution = last_solution


class DegenerateDomainError(ValueError):
    """Spatial extent has zero range in some direction."""


class OutOfDomainError(ValueError):
    """A coordinate falls outside the fitted bounding box."""


class ResourceLimitError(RuntimeError):
    """Estimated memory requirement exceeds the configured cap."""

    def __init__(self, message: str, estimated_bytes: int = 0, cap_bytes: int = 0):
        super().__init__(message)
        self.estimated_bytes = estimated_bytes
        self.cap_bytes = cap_bytes


class IdentifiabilityError(ValueError):
    """Model parameters are not jointly identifiable from the data."""


class CoverageError(ValueError):
    """Exposure window coverage below the acceptable threshold."""

    def __init__(self, message: str, missing_dates=()):
        super().__init__(message)
        self.missing_dates = list(missing_dates)


class UnassignableSubjectError(ValueError):
    """Subject location too far from every grid cell."""
