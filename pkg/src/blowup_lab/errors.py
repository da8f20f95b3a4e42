"""Exception hierarchy shared by all modules.

Two families matter to callers: bad input (the surface or the requested
parameters violate a precondition) and numerical faults (a computation
started but could not reach its stated accuracy).  The command line maps
the first to exit status 1 and the second to exit status 2.
"""


class BlowupLabError(Exception):
    """Base class for every error raised by the package."""


class InvalidProfileError(BlowupLabError, ValueError):
    """The surface profile, or a parameter derived from it, is not admissible."""


class NumericalFault(BlowupLabError, RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class ConvergenceError(NumericalFault):
    """An iteration, quadrature or matching step did not converge."""


class ResolutionError(NumericalFault):
    """The grid cannot resolve the requested scale."""


class StabilityError(NumericalFault):
    """A time step violates the stability limit of the scheme."""


class BlowupSuspected(NumericalFault):
    """The evolved field became non-finite."""

    def __init__(self, message, t=None, last_report=None):
        super().__init__(message)
        self.t = t
        self.last_report = last_report
