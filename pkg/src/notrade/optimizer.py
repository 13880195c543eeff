"""Constrained comparison of survival time along correlation level curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import closed_forms as cf
from .errors import InfeasibleError, ParameterError
from .process import McEstimate, ModelParams, estimate_K_mc
from .rng import RngStream
from .survival import SolverConfig, compute_H

DEFAULT_BUDGET = 10_000_000
ETA_TOL = 1e-10
# bisection on the Monte Carlo curve stops once the bracket is this narrow
MC_ETA_TOL = 1e-7
# relative accuracy attributed to the solver's H (grid refinement is ~1e-9)
SOLVER_REL_ERR = 1e-7


def max_level(rho: float) -> float:
    return rho * math.sqrt(2.0 / math.pi)


def eta_for_level(c: float, rho: float) -> float:
    """Threshold eta0 with K(0, eta0) = c; K_axis is strictly decreasing in eta."""
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")
    top = max_level(rho)
    if not 0.0 < c < top:
        raise InfeasibleError(f"level {c} outside the attainable range (0, {top})")
    hi = 1.0
    while cf.K_axis(hi, rho) > c:
        hi *= 2.0
    return optimize.bisect(lambda e: cf.K_axis(e, rho) - c, 0.0, hi,
                           xtol=0.1 * ETA_TOL, maxiter=200)


@dataclass(frozen=True)
class LevelCurvePoint:
    alpha: float
    eta: float
    K_value: McEstimate | float
    H_value: float
    source: str  # "closed-form", "solver" or "monte-carlo"
    H_error: float = 0.0
    eta_error: float = 0.0

    def accepted(self, c: float) -> bool:
        if isinstance(self.K_value, McEstimate):
            return abs(self.K_value.mean - c) <= max(2.0 * self.K_value.stderr, 1e-6)
        return abs(self.K_value - c) <= 1e-6


@dataclass
class LevelCurve:
    c: float
    rho: float
    points: list[LevelCurvePoint] = field(default_factory=list)
    # first alpha at which the level became unattainable, if any
    stopped_at: float | None = None
    reason: str = ""

    @property
    def reached(self) -> float:
        return max((p.alpha for p in self.points), default=float("nan"))


def _K_hat(alpha, eta, rho, budget, seed) -> McEstimate:
    return estimate_K_mc(ModelParams(rho=rho, alpha=alpha, eta=eta), budget, seed,
                         estimator="signal")


def eta_on_curve(c: float, rho: float, alpha: float, budget: int,
                 seed: RngStream, eta_guess: float) -> tuple[float, McEstimate]:
    """Bisection in eta on the Monte Carlo K at fixed alpha.

    Every evaluation reuses ``seed``, so the estimated K is one fixed
    (decreasing) function of eta and bisection is well defined.
    """
    lo, k_lo = 0.0, _K_hat(alpha, 0.0, rho, budget, seed)
    if k_lo.mean < c:
        raise InfeasibleError(f"level {c} not reached at alpha={alpha}: K(alpha, 0) = "
                              f"{k_lo.mean:.6g}")
    hi = max(eta_guess, 0.1)
    k_hi = _K_hat(alpha, hi, rho, budget, seed)
    while k_hi.mean >= c:
        lo, k_lo = hi, k_hi
        hi *= 1.5
        if hi > 10.0:
            raise InfeasibleError(f"no upper bracket for level {c} at alpha={alpha}")
        k_hi = _K_hat(alpha, hi, rho, budget, seed)
    while hi - lo > MC_ETA_TOL:
        mid = 0.5 * (lo + hi)
        k_mid = _K_hat(alpha, mid, rho, budget, seed)
        if k_mid.mean >= c:
            lo, k_lo = mid, k_mid
        else:
            hi, k_hi = mid, k_mid
    if abs(k_lo.mean - c) <= abs(k_hi.mean - c):
        return lo, k_lo
    return hi, k_hi


def trace_level_curve(c: float, rho: float, alpha_grid, budget: int = DEFAULT_BUDGET,
                      seed: RngStream | None = None,
                      cfg: SolverConfig = SolverConfig(),
                      slope_step: float = 0.02) -> LevelCurve:
    """Follow K(alpha, eta) = c over ``alpha_grid`` (ascending, within [0, 0.5]).

    The alpha = 0 point uses the closed forms; other points locate eta by
    Monte Carlo bisection and attach H from the survival solver.  ``H_error``
    propagates the Monte Carlo error of K through the local slopes dK/deta
    (common-random-number difference) and dH/deta (solver difference).
    Tracing stops at the first alpha where the level is unattainable.
    """
    alphas = [float(a) for a in np.atleast_1d(alpha_grid)]
    if not alphas or any(not 0.0 <= a <= 0.5 for a in alphas):
        raise ParameterError("alpha_grid must be non-empty and inside [0, 0.5]")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ParameterError("alpha_grid must be strictly increasing")
    if seed is None:
        seed = RngStream(0)
    eta0 = eta_for_level(c, rho)
    curve = LevelCurve(c=c, rho=rho)
    guess = eta0
    for alpha in alphas:
        if alpha == 0.0:
            curve.points.append(LevelCurvePoint(
                alpha=0.0, eta=eta0, K_value=cf.K_axis(eta0, rho),
                H_value=cf.H_at0(eta0), source="closed-form"))
            continue
        try:
            eta, k = eta_on_curve(c, rho, alpha, budget, seed, guess)
        except InfeasibleError as exc:
            curve.stopped_at = alpha
            curve.reason = str(exc)
            break
        guess = eta
        lo = max(eta - slope_step, 0.0)
        hi = eta + slope_step
        dK = ((_K_hat(alpha, hi, rho, budget, seed).mean
               - _K_hat(alpha, lo, rho, budget, seed).mean) / (hi - lo))
        H = compute_H(ModelParams(rho=rho, alpha=alpha, eta=eta), cfg)
        dH = (compute_H(ModelParams(rho=rho, alpha=alpha, eta=hi), cfg)
              - compute_H(ModelParams(rho=rho, alpha=alpha, eta=lo), cfg)) / (hi - lo)
        eta_err = math.inf if dK >= 0.0 else k.stderr / -dK
        H_err = math.hypot(dH * eta_err, SOLVER_REL_ERR * H)
        curve.points.append(LevelCurvePoint(
            alpha=alpha, eta=eta, K_value=k, H_value=H, source="monte-carlo",
            H_error=H_err, eta_error=eta_err))
    return curve


def local_optimality_report(eta0: float, rho: float) -> cf.OptimalityReport:
    grad_K = cf.grad_K_at0(eta0, rho)
    grad_H = cf.grad_H_at0(eta0)
    return cf.OptimalityReport(
        eta0=float(eta0),
        c=cf.K_axis(eta0, rho),
        grad_K=grad_K,
        grad_H=grad_H,
        lambda_=cf.lagrange_lambda(eta0, rho),
        collinearity_residual=cf.collinearity_residual(grad_H, grad_K),
        constrained_second_derivative=cf.constrained_second_derivative(eta0, rho),
        closed_form_second_derivative=cf.constrained_second_derivative_closed(eta0),
    )


@dataclass(frozen=True)
class ImprovementCell:
    alpha: float
    eta: float
    R: float


def improvement_table(alpha_grid, eta_grid) -> list[ImprovementCell]:
    """Improvement ratio over the product grid, alpha-major."""
    alphas = [float(a) for a in np.atleast_1d(alpha_grid)]
    etas = [float(e) for e in np.atleast_1d(eta_grid)]
    if not alphas or not etas:
        raise ParameterError("grids must be non-empty")
    return [ImprovementCell(a, e, cf.improvement_ratio(a, e)) for a in alphas for e in etas]


def improvement_violations(cells: list[ImprovementCell], n_alpha: int,
                           n_eta: int) -> list[str]:
    """Places where R fails to increase with alpha at fixed eta."""
    if len(cells) != n_alpha * n_eta:
        raise ParameterError("cell count does not match grid shape")
    table = np.array([c.R for c in cells]).reshape(n_alpha, n_eta)
    out = []
    for i in range(n_alpha - 1):
        for j in range(n_eta):
            if not table[i + 1, j] > table[i, j]:
                out.append(f"R not increasing at eta={cells[j].eta:g} between alpha="
                           f"{cells[i * n_eta].alpha:g} and {cells[(i + 1) * n_eta].alpha:g}")
    return out
