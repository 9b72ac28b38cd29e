"""Exception hierarchy.

Every error raised by the package derives from :class:`HodographError`, so
callers that only care about "the analysis could not proceed" can catch one
type. Errors that carry a partial result (the best Newton iterate, say)
expose it as attributes.
"""


class HodographError(Exception):
    """Base class for all package errors."""


class DomainError(HodographError, ValueError):
    """A hodograph point lies outside the validity domain of the map."""


class DerivativeError(HodographError):
    """A finite-difference stencil left the validity domain."""


class SingularError(HodographError, ZeroDivisionError):
    """The hodograph matrix is singular: the point sits on the blowup surface."""


class DegenerateError(HodographError):
    """A coefficient that is defined only for simple roots was requested at a
    multiple root (or another degenerate configuration)."""


class FullRankError(HodographError):
    """Null vectors were requested for a matrix of full numerical rank."""


class NoBlowupError(HodographError):
    """No positive blowup time exists in the searched region."""


class EmptyLocus(HodographError):
    """A zero-set trace found no sign change on the sampling grid."""


class WindowError(HodographError):
    """An asymptotic fitting window is contaminated or has no pole to fit."""


class ContaminationError(WindowError):
    """Another blowup sheet crosses the fitting ray inside the window."""


class ZeroVorticityError(HodographError):
    """A direction was requested for a vanishing vorticity."""


class NotAvailable(HodographError):
    """The map does not provide the requested optional ingredient."""


class ExpressionError(HodographError, ValueError):
    """Malformed or unsupported expression in the map mini-language."""


class NoConvergence(HodographError):
    """Newton iteration failed to reach tolerance.

    Attributes
    ----------
    u : numpy.ndarray
        Best iterate found.
    residual : float
        Residual norm at ``u``.
    iterations : int
        Iterations performed.
    """

    def __init__(self, message, u=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.u = u
        self.residual = residual
        self.iterations = iterations


class SingularNewton(NoConvergence):
    """The Newton Jacobian became numerically singular during iteration."""


class BranchViolation(HodographError):
    """A converged point violates the sign predicate of its map branch."""

    def __init__(self, message, u=None, branch=None):
        super().__init__(message)
        self.u = u
        self.branch = branch
