"""Exception hierarchy shared by all liftlayers modules."""


class LiftingError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LiftingError, ValueError):
    """Input lies outside the domain covered by the knots or triangulation."""


class OutsideDomainError(DomainError):
    """A point is not contained in any simplex of a triangulation."""


class DimensionError(LiftingError, ValueError):
    """Vector length does not match the number of knots or vertices."""


class ShapeError(LiftingError, ValueError):
    """Array shape does not match what a layer or network expects."""


class SingularSimplexError(LiftingError, ArithmeticError):
    """Barycentric system of a simplex is numerically singular."""


class DuplicateAbscissaError(LiftingError, ValueError):
    pass


class StateError(LiftingError, RuntimeError):
    """Operation requires state that is missing (e.g. backward before forward)."""


class RetryExhaustedError(LiftingError, RuntimeError):
    pass


class OracleViolation(LiftingError, AssertionError):
    """An independent oracle found a better solution than a claimed optimum."""
