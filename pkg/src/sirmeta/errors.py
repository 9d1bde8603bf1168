"""Exception types raised across the package."""


class SirmetaError(Exception):
    """Base class for package errors."""


class DomainError(SirmetaError, ValueError):
    """An argument lies outside the supported domain of an operation."""


class ConvergenceError(SirmetaError):
    """A series failed to reach its tolerance within the iteration cap."""


class QuadratureError(SirmetaError):
    """Adaptive quadrature exceeded its subdivision budget."""


class FixedPointError(SirmetaError):
    """The distribution fixed-point iteration did not converge.

    Carries the last two iterates and their sup-norm distance.
    """

    def __init__(self, message, last=None, previous=None, distance=None):
        super().__init__(message)
        self.last = last
        self.previous = previous
        self.distance = distance


class DegenerateVarianceError(SirmetaError):
    """Moment matching would produce a non-positive variance."""


class InsufficientDataError(SirmetaError):
    """Too few usable links survive the filtering rules."""


class EmptyRealizationError(SirmetaError):
    """A spatial realization contains no base stations."""
