"""Exception types shared across the engine.

CLI exit codes: InvalidInputError -> 2, NumericFailureError -> 3,
assertion failures requested on the command line -> 4.
"""


class GravredError(Exception):
    """Base class for engine errors."""


class InvalidInputError(GravredError, ValueError):
    """Malformed or inconsistent input (bad geometry, unnormalized amplitudes, ...)."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = list(details) if details else []


class NumericFailureError(GravredError, RuntimeError):
    """A numerical procedure failed to reach the requested tolerance."""

    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class StepTooLargeError(GravredError, RuntimeError):
    """Total jump probability in one step exceeded the stability guard (0.1).

    Callers halve the step and retry.
    """

    def __init__(self, message, total_probability=None):
        super().__init__(message)
        self.total_probability = total_probability


class InsufficientHistoryError(GravredError, RuntimeError):
    """A retarded evaluation needed scenario history outside its coverage."""


class InvalidStateError(GravredError, RuntimeError):
    """Engine state violates a structural precondition (broken parent chain, ...)."""


class ScheduleTimeoutError(GravredError, RuntimeError):
    """Tree enumeration hit its node budget before the schedule terminated."""

    def __init__(self, message, partial_tree=None):
        super().__init__(message)
        self.partial_tree = partial_tree
