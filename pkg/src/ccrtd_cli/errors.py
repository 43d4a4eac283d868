"""Exception hierarchy shared by the dispatch modules and the CLI."""


class CcrtdError(Exception):
    """Base class for all errors raised by ccrtd."""


class InvalidInputError(CcrtdError, ValueError):
    """Input data has the wrong shape, type or content."""


class DomainError(CcrtdError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateDistributionError(CcrtdError, ValueError):
    """A linear combination collapses to a point mass."""


class NotPositiveDefiniteError(CcrtdError, ValueError):
    """A scale matrix could not be factorized even after jitter."""


class IslandingError(CcrtdError):
    """The network graph has more than one island."""


class SingularNetworkError(CcrtdError):
    """The reduced susceptance matrix is numerically singular."""


class UnbalancedInjectionError(CcrtdError, ValueError):
    """Nodal injections do not sum to zero."""


class InfeasibleConfigError(CcrtdError, ValueError):
    """Device limits contradict each other before any optimization."""


class ConvexityViolationError(CcrtdError):
    """The objective Hessian has negative curvature."""


class NotApplicableError(CcrtdError):
    """The requested index is undefined for this horizon."""


class WindowInfeasibleError(CcrtdError):
    """A rolling-horizon window could not be solved to optimality."""

    def __init__(self, window: int, status: str, rows: list[str] | None = None):
        self.window = window
        self.status = status
        self.rows = rows or []
        detail = f": {', '.join(self.rows[:5])}" if self.rows else ""
        super().__init__(f"window {window} ended with status {status}{detail}")
