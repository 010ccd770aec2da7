"""Exception hierarchy shared by all modules."""


class PothullError(Exception):
    """Base class for library errors."""


class DomainError(PothullError, ValueError):
    """An input lies outside the domain of an operation."""


class UnsupportedOperation(PothullError):
    """The requested operation is not available for this cost kind."""


class FeasibilityError(PothullError):
    """A dual pair violates the constraint phi(x) + psi(y) <= c(x, y)."""

    def __init__(self, message, worst=None, violation=None):
        super().__init__(message)
        self.worst = worst
        self.violation = violation


class SolverError(PothullError):
    """The transport solver failed to converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class PreconditionError(PothullError):
    """Inputs do not satisfy an operation's precondition."""


class NegativeCycleError(PothullError):
    """The chain graph has a cycle of negative total weight."""


class InvariantViolation(PothullError):
    """An internal structural invariant does not hold."""
