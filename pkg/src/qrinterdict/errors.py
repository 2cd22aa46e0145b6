"""Exception hierarchy for the interdiction solver."""

from __future__ import annotations


class InterdictionError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(InterdictionError, ValueError):
    """The instance violates a structural or numeric requirement."""


class CycleDetected(ValidationError):
    pass


class DestinationUnreachable(ValidationError):
    pass


class CriticalEndpoint(ValidationError):
    pass


class BadBounds(ValidationError):
    pass


class MalformedInstance(ValidationError):
    """Dangling ids, duplicate arcs, or missing fields."""


class EmptySubgraph(InterdictionError):
    pass


class InvalidParams(InterdictionError, ValueError):
    pass


class InfeasibleStrategy(InterdictionError, ValueError):
    pass


class InfeasibleConstraints(InterdictionError, ValueError):
    pass


class NumericalUnderflow(InterdictionError, ArithmeticError):
    pass


class RestrictedUndefined(InterdictionError):
    """Every path crosses zero or at least two critical nodes."""


class PathExplosion(InterdictionError):
    pass


class StepTooLarge(InterdictionError, ValueError):
    pass


class TooManyCriticalNodes(InterdictionError, ValueError):
    pass


class BracketFailure(InterdictionError):
    pass


class SolverFailure(InterdictionError):
    pass
