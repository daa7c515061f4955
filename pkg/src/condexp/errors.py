"""Exception hierarchy shared by every module."""


class CondExpError(Exception):
    """Base class for all package errors."""


class ValidationError(CondExpError, ValueError):
    """Invalid input to a constructor or operation."""


class EmptySpaceError(ValidationError):
    pass


class NegativeWeightError(ValidationError):
    pass


class ZeroMassError(ValidationError):
    pass


class SizeMismatchError(ValidationError):
    pass


class EventIndexError(ValidationError, IndexError):
    pass


class MeasurabilityError(ValidationError):
    """A variable required to be G-measurable is not."""


class ConvergenceError(CondExpError):
    """Iterative solver stopped at ``max_iterations`` without meeting its tolerance.

    The last iterate is kept on ``result`` so callers can still report it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
