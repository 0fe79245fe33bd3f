"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes; library callers can catch the
base class.
"""


class FplapError(Exception):
    """Base class for all package-level failures."""


class ParameterError(FplapError):
    """Invalid parameters, configuration keys, or precondition violations."""


class ConvergenceError(FplapError):
    """An iteration hit its cap or stalled.

    The best iterate seen so far is attached as ``best`` (may be None).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegeneratePathError(ConvergenceError):
    """A mountain-pass path collapsed onto one of its endpoints."""


class DegeneracyError(ConvergenceError):
    """A candidate solution branch collapsed to the zero function."""


class NotFoundError(FplapError):
    """A requested solution (e.g. a sign-changing one) was not found."""


class InternalCheckError(FplapError):
    """An internal ordering/monotonicity assertion failed.

    This signals a breakdown of a discrete comparison property and is
    surfaced rather than silently repaired.
    """
