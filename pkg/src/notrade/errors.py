"""Exception hierarchy shared by every module."""


class NotradeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NotradeError, ValueError):
    """Input outside the mathematical domain (non-finite, p outside (0, 1), ...)."""


class ParameterError(NotradeError, ValueError):
    """Model or configuration parameter outside its allowed range."""


class UnsupportedRegionError(NotradeError, ValueError):
    """Gaussian tail too deep for double precision (eta > 8 and similar)."""


class SingularityError(NotradeError, ValueError):
    """Quantity undefined at the requested point (e.g. the multiplier at eta = 0)."""


class InfeasibleError(NotradeError, ValueError):
    """Requested correlation level cannot be attained."""


class NonTerminationError(NotradeError, RuntimeError):
    """A simulated survival path exceeded the hard step cap."""


class ConvergenceError(NotradeError, RuntimeError):
    """Iterative or adaptive numerical scheme did not reach its tolerance."""


class TruncationError(NotradeError, RuntimeError):
    """Truncated integration domain loses more kernel mass than allowed."""
