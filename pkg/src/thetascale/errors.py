"""Exception hierarchy shared by every thetascale module."""


class ThetaScaleError(Exception):
    """Base class for all library errors."""


class SpecParseError(ThetaScaleError, ValueError):
    """A spec string (field, metric, curve, packet) could not be parsed."""

    def __init__(self, message, token=None):
        super().__init__(message)
        self.token = token


class StructureMismatchError(ThetaScaleError, ValueError):
    """Operands belong to different scaled number structures."""


class DomainError(ThetaScaleError, ValueError):
    """Input lies outside the domain of an operation."""


class SingularityError(DomainError):
    """A field was evaluated at one of its declared singular points."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DivergenceError(DomainError):
    """A scaling exponent exceeded the overflow guard.

    ``partial`` holds the largest finite partial value computed before the
    divergence was detected, when one is available.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StencilError(DomainError):
    """Not enough samples for a finite-difference stencil."""


class ConvergenceError(ThetaScaleError, RuntimeError):
    """An iterative procedure hit its iteration or subdivision cap."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
