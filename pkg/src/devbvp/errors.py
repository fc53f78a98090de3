"""Exception hierarchy shared by all modules."""


class DevbvpError(Exception):
    """Base class for every error raised by the package."""


class DomainError(DevbvpError, ValueError):
    """A point lies outside the interval a trajectory is defined on."""


class MeshMismatchError(DevbvpError, ValueError):
    """Two trajectories that must share a mesh do not."""


class DeviationError(DevbvpError, ValueError):
    """The deviated argument leaves [a, b] or has the wrong direction."""


class PreconditionError(DevbvpError, ValueError):
    """An input violates a documented precondition (e.g. negative weight)."""


class EvaluationError(DevbvpError, ArithmeticError):
    """A user function produced a non-finite or undefined value."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class BracketError(DevbvpError, ValueError):
    """Root finder called without h(a) <= 0 <= h(b)."""

    def __init__(self, message, h_lo=None, h_hi=None):
        super().__init__(message)
        self.h_lo = h_lo
        self.h_hi = h_hi


class NonConvergenceError(DevbvpError):
    """An iteration hit its cap before meeting the stopping rule."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class HypothesisViolation(DevbvpError):
    """User data breaks a hypothesis the monotone method relies on."""

    def __init__(self, message, node=None, amount=None):
        super().__init__(message)
        self.node = node
        self.amount = amount


class InfeasibleBoundsError(DevbvpError):
    """The lower/upper solution construction is not feasible."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ProblemFileError(DevbvpError, ValueError):
    """Malformed problem file."""
