"""Explicit formulas for the correlation K, the survival time H and their
derivatives on the axis alpha = 0.

Notation used throughout: ``g = f(eta)`` (density, even so ``f(-eta) = g``)
and ``G = F(-eta)`` (upper tail, computed without cancellation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError, SingularityError, UnsupportedRegionError
from .gaussian import INV_SQRT_2PI, TAIL_LIMIT, gauss_pdf, gauss_sf


@dataclass(frozen=True)
class GradPair:
    d_alpha: float
    d_eta: float

    def __post_init__(self):
        if not (math.isfinite(self.d_alpha) and math.isfinite(self.d_eta)):
            raise ParameterError("gradient components must be finite")

    @property
    def norm(self) -> float:
        return math.hypot(self.d_alpha, self.d_eta)


@dataclass(frozen=True)
class HessTriple:
    d_aa: float
    d_ae: float
    d_ee: float

    def quad_form(self, v: tuple[float, float]) -> float:
        va, ve = v
        return self.d_aa * va * va + 2.0 * self.d_ae * va * ve + self.d_ee * ve * ve


@dataclass(frozen=True)
class OptimalityReport:
    eta0: float
    c: float
    grad_K: GradPair
    grad_H: GradPair
    lambda_: float
    collinearity_residual: float
    constrained_second_derivative: float
    closed_form_second_derivative: float

    COLLINEARITY_TOL = 1e-10

    @property
    def passed(self) -> bool:
        return (self.collinearity_residual <= self.COLLINEARITY_TOL
                and self.constrained_second_derivative < 0.0)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not (eta >= 0.0 and math.isfinite(eta)):
        raise ParameterError(f"eta must be finite and >= 0, got {eta}")
    return eta


def _tail_eta(eta: float) -> float:
    eta = _check_eta(eta)
    if eta > TAIL_LIMIT:
        raise UnsupportedRegionError(f"eta={eta} beyond {TAIL_LIMIT}: F(-eta)**2 underflows")
    return eta


def _positive_eta(eta: float) -> float:
    eta = _tail_eta(eta)
    if eta == 0.0:
        raise SingularityError("the Lagrange multiplier is undefined at eta = 0")
    return eta


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha


def _one_minus_sqrt(alpha: float) -> float:
    # 1 - sqrt(1 - a^2) without cancellation at small a
    return alpha * alpha / (1.0 + math.sqrt(1.0 - alpha * alpha))


def _cdf_gap(alpha: float, eta: float) -> float:
    """F(b*eta) - F(a*eta) with a = sqrt((1-alpha)/(1+alpha)), b = 1/a; >= 0."""
    a = math.sqrt((1.0 - alpha) / (1.0 + alpha))
    return gauss_sf(a * eta) - gauss_sf(eta / a)


# -- correlation function -------------------------------------------------

def K0(alpha: float, eta: float, rho: float) -> float:
    """Contribution of signals beyond the thresholds."""
    alpha = _check_alpha(alpha)
    return 2.0 * rho * gauss_pdf(_check_eta(eta)) * math.sqrt(1.0 - alpha * alpha)


def E0(alpha: float, eta: float, rho: float) -> float:
    """First hysteresis drag term (previous signal above eta, current inside)."""
    alpha = _check_alpha(alpha)
    eta = _check_eta(eta)
    return -2.0 * rho * gauss_pdf(eta) * math.sqrt(1.0 - alpha * alpha) * _cdf_gap(alpha, eta)


def K_axis(eta: float, rho: float) -> float:
    return 2.0 * rho * gauss_pdf(_check_eta(eta))


def grad_K_at0(eta: float, rho: float) -> GradPair:
    eta = _check_eta(eta)
    return GradPair(
        d_alpha=-(2.0 * rho / math.pi) * eta * math.exp(-eta * eta),
        d_eta=-2.0 * rho * INV_SQRT_2PI * eta * math.exp(-0.5 * eta * eta),
    )


def d2E1_dalpha2_at0(eta: float, rho: float) -> float:
    """Curvature in alpha of the second hysteresis term at alpha = 0.

    -8 rho eta g^2 (F(eta) - F(-eta) - 2 eta g); checked against direct
    quadrature of the term in the test suite.
    """
    eta = _check_eta(eta)
    g = gauss_pdf(eta)
    return -8.0 * rho * eta * g * g * (math.erf(eta / math.sqrt(2.0)) - 2.0 * eta * g)


def hess_K_at0(eta: float, rho: float) -> HessTriple:
    eta = _check_eta(eta)
    g = gauss_pdf(eta)
    e2 = math.exp(-eta * eta)
    return HessTriple(
        d_aa=-2.0 * rho * g + d2E1_dalpha2_at0(eta, rho),
        d_ae=(2.0 * rho / math.pi) * (2.0 * eta * eta - 1.0) * e2,
        d_ee=2.0 * rho * (eta * eta - 1.0) * g,
    )


# -- expected stopping time h(x) on the axis -------------------------------

def h_at0(eta: float) -> float:
    return 1.0 / gauss_sf(_tail_eta(eta))


def dh_dalpha_at0(eta: float, x: float) -> float:
    eta = _tail_eta(eta)
    g, G = gauss_pdf(eta), gauss_sf(eta)
    return g * g / (G * G) + (g / G) * x


def dh_deta_at0(eta: float) -> float:
    eta = _tail_eta(eta)
    G = gauss_sf(eta)
    return gauss_pdf(eta) / (G * G)


def _bracket(eta: float) -> float:
    # integral over (-eta, inf) of dh/dalpha(0, eta, y) * y * f(y)
    g, G = gauss_pdf(eta), gauss_sf(eta)
    return g**3 / G**2 - eta * g * g / G + g / G - g


def d2h_dalpha2_integral_at0(eta: float) -> float:
    """Integral over (eta, inf) of d2h/dalpha2(0, eta, x) f(x) dx."""
    eta = _tail_eta(eta)
    return 4.0 * gauss_pdf(eta) * _bracket(eta)


# -- expected survival time H ----------------------------------------------

def H_at0(eta: float) -> float:
    return h_at0(eta)


def grad_H_at0(eta: float) -> GradPair:
    eta = _tail_eta(eta)
    g, G = gauss_pdf(eta), gauss_sf(eta)
    return GradPair(d_alpha=2.0 * g * g / (G * G), d_eta=g / (G * G))


def hess_H_at0(eta: float) -> HessTriple:
    eta = _tail_eta(eta)
    g, G = gauss_pdf(eta), gauss_sf(eta)
    return HessTriple(
        d_aa=d2h_dalpha2_integral_at0(eta) / G,
        d_ae=(4.0 * g * g / G**3) * (-eta * G + g),
        d_ee=(g / G**3) * (-eta * G + 2.0 * g),
    )


# -- constrained optimality at alpha = 0 -----------------------------------

def lagrange_lambda(eta: float, rho: float) -> float:
    eta = _positive_eta(eta)
    G = gauss_sf(eta)
    return -1.0 / (2.0 * rho * eta * G * G)


def level_tangent(eta: float) -> tuple[float, float]:
    """Tangent (d alpha, d eta) of the level curve K = const at alpha = 0."""
    return 1.0 / (2.0 * gauss_pdf(_check_eta(eta))), -1.0


def constrained_second_derivative(eta: float, rho: float) -> float:
    """Second derivative of H along the level curve K = c at alpha = 0.

    With a parametrisation (alpha(t), eta(t)) of the level set and
    grad H = lambda grad K, the curve acceleration drops out:
    grad K . v' = -D2K(v, v), so d2H/dt2 = D2H(v, v) - lambda D2K(v, v).
    """
    eta = _positive_eta(eta)
    v = level_tangent(eta)
    lam = lagrange_lambda(eta, rho)
    return hess_H_at0(eta).quad_form(v) - lam * hess_K_at0(eta, rho).quad_form(v)


def constrained_second_derivative_closed(eta: float) -> float:
    """Simplified form of :func:`constrained_second_derivative`; rho-free."""
    eta = _positive_eta(eta)
    g, G = gauss_pdf(eta), gauss_sf(eta)
    return (-1.0 / (4.0 * eta * g * G * G)
            - g * g / G**3
            + 1.0 / G
            + eta * g / (G * G)
            + g / (eta * G * G))


def collinearity_residual(grad_H: GradPair, grad_K: GradPair) -> float:
    det = grad_H.d_alpha * grad_K.d_eta - grad_H.d_eta * grad_K.d_alpha
    return abs(det) / (grad_H.norm * grad_K.norm)


def improvement_ratio(alpha: float, eta: float) -> float:
    """Relative correlation gain from dropping the smoothing at fixed eta.

    Equals (K_axis - (K0 + E0)) / (K0 + E0).
    """
    alpha = _check_alpha(alpha)
    eta = _check_eta(eta)
    s = math.sqrt(1.0 - alpha * alpha)
    d = _cdf_gap(alpha, eta)
    return (_one_minus_sqrt(alpha) + s * d) / (s * (1.0 - d))


__all__ = [
    "GradPair", "HessTriple", "OptimalityReport",
    "K0", "E0", "K_axis", "grad_K_at0", "d2E1_dalpha2_at0", "hess_K_at0",
    "h_at0", "dh_dalpha_at0", "dh_deta_at0", "d2h_dalpha2_integral_at0",
    "H_at0", "grad_H_at0", "hess_H_at0",
    "lagrange_lambda", "level_tangent", "constrained_second_derivative",
    "constrained_second_derivative_closed", "collinearity_residual",
    "improvement_ratio",
]
