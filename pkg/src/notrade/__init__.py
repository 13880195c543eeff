"""Smoothed-signal trading with a no-trade zone: correlation, survival time
and the constrained trade-off between them."""

from .errors import (ConvergenceError, DomainError, InfeasibleError, NonTerminationError,
                     NotradeError, ParameterError, SingularityError, TruncationError,
                     UnsupportedRegionError)
from .process import McEstimate, ModelParams, SignalPath
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DomainError", "InfeasibleError", "NonTerminationError",
    "NotradeError", "ParameterError", "SingularityError", "TruncationError",
    "UnsupportedRegionError", "McEstimate", "ModelParams", "SignalPath", "RngStream",
    "__version__",
]
