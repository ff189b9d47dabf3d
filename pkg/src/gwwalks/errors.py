"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GWWalksError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GWWalksError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class SubcriticalError(DomainError):
    """Offspring mean m <= 1 was given without explicitly allowing it."""


class UnreachableVertexError(GWWalksError, KeyError):
    """The vertex has not been generated (its parent was never expanded)."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else "unreachable vertex"


class IsolatedVertexError(GWWalksError):
    """The current vertex has no neighbours (childless root)."""


class NonConvergenceError(GWWalksError):
    """An iterative scheme hit its iteration cap.

    The last iterate is kept in ``iterate``.
    """

    def __init__(self, message: str, iterate: float):
        super().__init__(f"{message} (last iterate {iterate!r})")
        self.iterate = iterate


class NoThresholdError(DomainError):
    """No finite threshold exists for the given parameters."""


class DivergentSeriesError(DomainError):
    """The requested series does not converge."""


class QuadratureDisagreementError(GWWalksError):
    """Two independent quadratures differ by more than the tolerance."""


class DegenerateEstimateError(GWWalksError):
    """Every trial was censored, so no estimate can be formed."""
