"""Exception hierarchy shared by all modules."""


class OrthorecError(Exception):
    """Base class for every error raised by the package."""


class ZeroPair(OrthorecError, ValueError):
    pass


class IndexOutOfRange(OrthorecError, IndexError):
    pass


class NotProper(OrthorecError, ValueError):
    """A Hessenberg matrix or pencil has a vanishing subdiagonal (pair)."""


class ConvergenceFailure(OrthorecError, RuntimeError):
    pass


class Breakdown(OrthorecError, RuntimeError):
    """An up- or downdating procedure could not produce a valid recurrence.

    ``step`` is filled in by drivers that run many downdates in sequence.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DuplicateNode(Breakdown):
    pass


class PoleEqualsNode(OrthorecError, ValueError):
    pass


class DeflationFailed(Breakdown):
    """The coupling between the isolated eigenvalue and the rest stayed too large."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message, step=step)
        self.residual = residual


class RecurrenceBreakdown(Breakdown):
    pass


class SingularSolve(OrthorecError, RuntimeError):
    pass


class TrailingAccuracyFailed(OrthorecError, RuntimeError):
    """No trailing-accurate eigenvector could be produced.

    The best attempt is attached so callers can decide to go on anyway.
    """

    def __init__(self, message, vector=None, achieved=None, bound=None):
        super().__init__(message)
        self.vector = vector
        self.achieved = achieved
        self.bound = bound


class SwapIllConditioned(OrthorecError, RuntimeError):
    pass


class ShiftIsEigenvalue(OrthorecError, ValueError):
    pass


class EvaluationAtPole(OrthorecError, ValueError):
    pass


class DegreeTooLarge(OrthorecError, ValueError):
    pass


class ConfigInvalid(OrthorecError, ValueError):
    pass
