"""Quadrature oracles for the correlation decomposition K = K0 + E0 + E1 + ...

Each oracle integrates the defining expectation directly in the original
variables (current innovation x, previous innovation y, older smoothed value
z); only the innermost integral of x f(x), whose antiderivative is -f(x), is
done by hand for E1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate

from . import closed_forms
from .errors import ConvergenceError, ParameterError
from .gaussian import INV_SQRT_2PI


@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-10
    domain_radius: float = 10.0
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0.0:
            raise ParameterError("abs_tol must be positive")
        if self.domain_radius < 8.0:
            raise ParameterError("domain_radius must be at least 8")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be positive")


DEFAULT = QuadConfig()


def _pdf(x: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _quad(fn, a: float, b: float, tol: float, cfg: QuadConfig) -> float:
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fn, a, b, epsabs=tol, epsrel=0.0,
                                    limit=cfg.max_subdivisions)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(f"quadrature on [{a}, {b}] failed: {exc}") from exc
    return val


def _check(alpha: float, lo: float = 0.0, hi: float = 0.99) -> float:
    alpha = float(alpha)
    if not lo <= alpha <= hi:
        raise ParameterError(f"alpha must lie in [{lo}, {hi}], got {alpha}")
    return alpha


def K0_numeric(alpha: float, eta: float, rho: float, cfg: QuadConfig = DEFAULT) -> float:
    """2 rho * integral of x f(x) f(z) over {sqrt(1-alpha^2) x + alpha z >= eta}."""
    alpha = _check(alpha)
    R = cfg.domain_radius
    s = math.sqrt(1.0 - alpha * alpha)
    inner_tol = 0.1 * cfg.abs_tol / (2.0 * rho)

    def outer(z):
        lo = max((eta - alpha * z) / s, -R)
        return _pdf(z) * _quad(lambda x: x * _pdf(x), lo, R, inner_tol, cfg)

    return 2.0 * rho * _quad(outer, -R, R, cfg.abs_tol / (2.0 * rho), cfg)


def E0_numeric(alpha: float, eta: float, rho: float, cfg: QuadConfig = DEFAULT) -> float:
    """Previous smoothed value y >= eta, current one pushed back inside the zone."""
    alpha = _check(alpha)
    R = cfg.domain_radius
    s = math.sqrt(1.0 - alpha * alpha)
    inner_tol = 0.1 * cfg.abs_tol / (2.0 * rho)

    def outer(y):
        lo = max((-alpha * y - eta) / s, -R)
        hi = min((-alpha * y + eta) / s, R)
        return _pdf(y) * _quad(lambda x: x * _pdf(x), lo, hi, inner_tol, cfg)

    return 2.0 * rho * _quad(outer, eta, R, cfg.abs_tol / (2.0 * rho), cfg)


def E1_numeric(alpha: float, eta: float, rho: float, cfg: QuadConfig = DEFAULT) -> float:
    """Smoothed value z >= eta two steps back, then two steps inside the zone.

    Outer region: z >= eta and -eta <= sqrt(1-a^2) y + a z <= eta.  The
    innermost x-integral over the zone is f(lower) - f(upper).
    """
    alpha = _check(alpha)
    R = cfg.domain_radius
    s = math.sqrt(1.0 - alpha * alpha)
    inner_tol = 0.1 * cfg.abs_tol / (2.0 * rho)

    def x_integral(u):
        return _pdf((-eta - alpha * u) / s) - _pdf((eta - alpha * u) / s)

    def outer(z):
        lo = max((-eta - alpha * z) / s, -R)
        hi = min((eta - alpha * z) / s, R)
        fn = lambda y: _pdf(y) * x_integral(s * y + alpha * z)  # noqa: E731
        return _pdf(z) * _quad(fn, lo, hi, inner_tol, cfg)

    return 2.0 * rho * _quad(outer, eta, R, cfg.abs_tol / (2.0 * rho), cfg)


def K_truncated(alpha: float, eta: float, rho: float, cfg: QuadConfig = DEFAULT) -> float:
    """K0 + E0 + E1; the neglected terms are O(alpha**3)."""
    alpha = _check(alpha, 0.0, 0.5)
    return (closed_forms.K0(alpha, eta, rho) + closed_forms.E0(alpha, eta, rho)
            + E1_numeric(alpha, eta, rho, cfg))


def d2E1_numeric(eta: float, rho: float, step: float = 0.01,
                 cfg: QuadConfig = DEFAULT) -> float:
    """One-sided second-order difference of E1 in alpha at alpha = 0."""
    e = [E1_numeric(k * step, eta, rho, cfg) for k in range(4)]
    return (2.0 * e[0] - 5.0 * e[1] + 4.0 * e[2] - e[3]) / (step * step)
