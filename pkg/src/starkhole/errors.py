"""Exception and warning types raised by starkhole."""


class StarkHoleError(Exception):
    """Base class for all library errors."""


class DomainError(StarkHoleError, ValueError):
    """An argument lies outside the domain of the operation."""


class QuadratureError(StarkHoleError):
    """Adaptive quadrature could not reach the requested tolerance.

    ``achieved_error`` is the final error estimate; ``x`` is the detuning
    being evaluated when known.
    """

    def __init__(self, message, achieved_error=float("nan"), x=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.x = x


class RootBracketError(StarkHoleError):
    """A root could not be bracketed."""


class FitError(StarkHoleError):
    """The least-squares optimizer did not converge.

    ``trace`` holds the objective value after every accepted step.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class DegenerateDataError(StarkHoleError, ValueError):
    """The data carry no information about the requested parameters."""


class PreconditionError(StarkHoleError, ValueError):
    """Input is structurally incomplete (e.g. a sweep lacks its zero-field record)."""


class NoSolutionError(StarkHoleError, ValueError):
    """A planning target cannot be reached."""


class BoundaryWarning(UserWarning):
    """A fitted parameter finished on its constraint boundary."""
