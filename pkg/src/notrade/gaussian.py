"""Standard normal primitives and samplers.

The cdf goes through ``erfc`` so that upper tails keep full relative
precision; downstream formulas divide by ``F(-eta)**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _kernels
from .errors import DomainError, UnsupportedRegionError
from .rng import RngStream

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
TAIL_LIMIT = 8.0


def _finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def gauss_pdf(x):
    """Standard normal density; accepts scalars or arrays."""
    a = _finite(x)
    return _out(INV_SQRT_2PI * np.exp(-0.5 * a * a), x)


def gauss_cdf(x):
    """Standard normal cdf ``F(x) = erfc(-x/sqrt(2))/2``."""
    a = _finite(x)
    return _out(0.5 * special.erfc(-a / math.sqrt(2.0)), x)


def gauss_sf(x):
    """Upper tail ``1 - F(x) = F(-x)`` without cancellation."""
    a = _finite(x)
    return _out(0.5 * special.erfc(a / math.sqrt(2.0)), x)


def gauss_inv_cdf(p):
    p_arr = np.asarray(p, dtype=float)
    if not np.all((p_arr > 0.0) & (p_arr < 1.0)):
        raise DomainError("p must lie strictly inside (0, 1)")
    if p_arr.ndim == 0:
        return float(_kernels.ndtri(float(p_arr)))
    return np.array([_kernels.ndtri(v) for v in p_arr.ravel()]).reshape(p_arr.shape)


@dataclass(frozen=True)
class TruncatedMoments:
    """Integrals of x, x**2 - 1 and x**2 against the density over [u, inf)."""

    lower_bound: float
    mean_part: float
    x2m1_part: float
    x2_part: float


def trunc_moments(u: float) -> TruncatedMoments:
    u = float(_finite(u, "u"))
    fu = gauss_pdf(u)
    return TruncatedMoments(
        lower_bound=u,
        mean_part=fu,
        x2m1_part=u * fu,
        x2_part=u * fu + gauss_sf(u),
    )


def sample_std_normal(rng: RngStream) -> float:
    return rng.normal()


def sample_truncated_above(u: float, rng: RngStream) -> float:
    """Draw from N(0, 1) conditioned on exceeding ``u`` (one uniform per draw)."""
    u = float(_finite(u, "u"))
    if u > TAIL_LIMIT:
        raise UnsupportedRegionError(f"truncation point {u} beyond {TAIL_LIMIT}")
    # P(X > x) = U * P(X > u)  =>  x = -F^{-1}(U * F(-u))
    return -_kernels.ndtri(rng.uniform() * gauss_sf(u))
