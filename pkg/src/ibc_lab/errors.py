"""Exception types shared across the package."""

from __future__ import annotations


class IbcLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(IbcLabError):
    """Inconsistent inputs: dimension mismatches, invalid config keys, bad tags."""


class DomainError(IbcLabError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class NonConvergenceError(IbcLabError):
    """A quadrature did not reach its tolerance.

    Carries the best estimate obtained so far in ``best``.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


class SamplingError(IbcLabError):
    """Monte Carlo sampling produced a non-finite value; ``point`` is the offender."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class FitError(IbcLabError):
    """Least-squares extraction failed (rank deficiency or condition overflow)."""


class ConsistencyError(IbcLabError):
    """Two independent computation routes disagree beyond their tolerance."""


class CancellationTrendError(IbcLabError):
    """A counterterm-subtracted sequence shows a divergent trend."""
