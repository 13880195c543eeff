"""Cross-validation gates tying the closed forms, quadrature, solver and
Monte Carlo estimators together.

Each gate returns a :class:`GateResult`.  Monte Carlo sample sizes scale with
``budget`` (1.0 is the nominal size of every check); below nominal size a
Monte Carlo gate reports ``UNDERPOWERED`` instead of a verdict, since a wider
error bar would make it easier to pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import closed_forms as cf
from . import optimizer, quadrature, survival
from .errors import NotradeError, ParameterError
from .gaussian import gauss_pdf
from .process import ModelParams, estimate_H_mc, estimate_K_mc
from .rng import RngStream

PASS, FAIL, UNDERPOWERED = "PASS", "FAIL", "UNDERPOWERED"

SIGMA_RANGE = (1.0, 5.0)
BUDGET_RANGE = (1e-6, 100.0)
DEFAULT_RHO = 0.1
DEFAULT_LEVEL = 2.0 * DEFAULT_RHO * gauss_pdf(1.0)

NOMINAL_K_STEPS = 10_000_000
NOMINAL_H_SAMPLES = 1_000_000


@dataclass
class GateResult:
    number: int
    name: str
    status: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    time_limit: float | None = None

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass(frozen=True)
class VerifySettings:
    level: float = DEFAULT_LEVEL
    rho: float = DEFAULT_RHO
    budget: float = 1.0
    sigma: float = 3.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not SIGMA_RANGE[0] <= self.sigma <= SIGMA_RANGE[1]:
            raise ParameterError(f"sigma must lie in [{SIGMA_RANGE[0]}, {SIGMA_RANGE[1]}]")
        if not BUDGET_RANGE[0] <= self.budget <= BUDGET_RANGE[1]:
            raise ParameterError(f"budget must lie in [{BUDGET_RANGE[0]}, {BUDGET_RANGE[1]}]")
        if not 0.0 < self.rho < 1.0:
            raise ParameterError("rho must lie in (0, 1)")
        if not 0.0 < self.level < optimizer.max_level(self.rho):
            raise ParameterError(
                f"level must lie in (0, {optimizer.max_level(self.rho):.6g}) for rho={self.rho}")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    @property
    def full_power(self) -> bool:
        return self.budget >= 1.0

    def steps(self, nominal: int, floor: int = 5000) -> int:
        return max(int(round(nominal * self.budget)), floor)

    def stream(self, gate: int, index: int = 0) -> RngStream:
        return RngStream(self.seed).spawn(1000 * gate + index)


def _mc_status(ok: bool, s: VerifySettings) -> str:
    if not s.full_power:
        return UNDERPOWERED
    return PASS if ok else FAIL


def gate_axis(s: VerifySettings) -> GateResult:
    worst = 0.0
    for eta in (0.25, 0.5, 1.0):
        grid = survival.solve_h(ModelParams(rho=s.rho, alpha=0.0, eta=eta))
        worst = max(worst, float(np.max(np.abs(grid.values - cf.h_at0(eta)))))
    return GateResult(1, "axis exactness", PASS if worst <= 1e-8 else FAIL,
                      {"max_abs_error": worst, "tolerance": 1e-8}, time_limit=10.0)


def gate_K_mc(s: VerifySettings) -> GateResult:
    T = s.steps(NOMINAL_K_STEPS)
    detail, ok = {"steps": T}, True
    for i, eta in enumerate((0.0, 0.5, 1.0, 2.0)):
        est = estimate_K_mc(ModelParams(rho=0.1, alpha=0.0, eta=eta), T, s.stream(2, i))
        target = cf.K_axis(eta, 0.1)
        detail[f"eta={eta:g}"] = {"mean": est.mean, "stderr": est.stderr, "target": target}
        ok &= est.within(target, s.sigma)
    return GateResult(2, "K closed form vs Monte Carlo", _mc_status(ok, s), detail,
                      time_limit=60.0)


def gate_H_mc(s: VerifySettings) -> GateResult:
    n = s.steps(NOMINAL_H_SAMPLES, floor=100)
    detail, ok = {"samples": n}, True
    for i, eta in enumerate((0.0, 0.5, 1.0)):
        est = estimate_H_mc(ModelParams(rho=0.1, alpha=0.0, eta=eta), n, s.stream(3, i))
        target = cf.H_at0(eta)
        detail[f"eta={eta:g}"] = {"mean": est.mean, "stderr": est.stderr, "target": target}
        ok &= est.within(target, s.sigma)
    return GateResult(3, "H closed form vs Monte Carlo", _mc_status(ok, s), detail,
                      time_limit=60.0)


def gate_solver_mc(s: VerifySettings) -> GateResult:
    n = s.steps(NOMINAL_H_SAMPLES, floor=100)
    detail, ok = {"samples": n}, True
    for i, (alpha, eta) in enumerate(((0.3, 0.5), (0.5, 1.0), (0.7, 0.5))):
        params = ModelParams(rho=0.1, alpha=alpha, eta=eta)
        H = survival.compute_H(params)
        est = estimate_H_mc(params, n, s.stream(4, i))
        detail[f"alpha={alpha:g},eta={eta:g}"] = {
            "solver": H, "mean": est.mean, "stderr": est.stderr}
        ok &= est.within(H, s.sigma)
    return GateResult(4, "solver vs Monte Carlo off-axis", _mc_status(ok, s), detail,
                      time_limit=300.0)


def _fd_grad_K(eta: float, rho: float, step: float = 1e-3) -> cf.GradPair:
    cfg = quadrature.QuadConfig(abs_tol=1e-13)
    k = [quadrature.K_truncated(j * step, eta, rho, cfg) for j in range(3)]
    d_alpha = (-3.0 * k[0] + 4.0 * k[1] - k[2]) / (2.0 * step)
    d_eta = (cf.K_axis(eta + step, rho) - cf.K_axis(eta - step, rho)) / (2.0 * step)
    return cf.GradPair(d_alpha=d_alpha, d_eta=d_eta)


def gate_gradients(s: VerifySettings) -> GateResult:
    detail, ok = {}, True
    for eta in (0.5, 1.0):
        fd = survival.fd_grad_H(eta)
        exact = cf.grad_H_at0(eta)
        rel = max(abs(fd.d_alpha / exact.d_alpha - 1.0), abs(fd.d_eta / exact.d_eta - 1.0))
        fdk = _fd_grad_K(eta, 0.1)
        exk = cf.grad_K_at0(eta, 0.1)
        err_k = max(abs(fdk.d_alpha - exk.d_alpha), abs(fdk.d_eta - exk.d_eta))
        detail[f"eta={eta:g}"] = {"grad_H_rel_error": rel, "grad_K_abs_error": err_k}
        ok &= rel <= 0.02 and err_k <= 1e-6
    return GateResult(5, "gradient gates", PASS if ok else FAIL, detail)


def gate_quadrature(s: VerifySettings) -> GateResult:
    detail, ok = {}, True
    for alpha, eta in ((0.3, 0.5), (0.5, 1.0)):
        e_k0 = abs(quadrature.K0_numeric(alpha, eta, 0.1) - cf.K0(alpha, eta, 0.1))
        e_e0 = abs(quadrature.E0_numeric(alpha, eta, 0.1) - cf.E0(alpha, eta, 0.1))
        detail[f"alpha={alpha:g},eta={eta:g}"] = {"K0_error": e_k0, "E0_error": e_e0}
        ok &= e_k0 <= 1e-8 and e_e0 <= 1e-8
    fd = quadrature.d2E1_numeric(1.0, 0.1)
    exact = cf.d2E1_dalpha2_at0(1.0, 0.1)
    rel = abs(fd / exact - 1.0)
    detail["d2E1_rel_error"] = rel
    ok &= rel <= 0.01
    return GateResult(6, "quadrature vs closed form", PASS if ok else FAIL, detail)


def gate_lagrange(s: VerifySettings) -> GateResult:
    etas = [round(0.05 * k, 2) for k in range(1, 61)]
    worst_res, worst_gap, max_second = 0.0, 0.0, -math.inf
    for eta in etas:
        rep = optimizer.local_optimality_report(eta, s.rho)
        worst_res = max(worst_res, rep.collinearity_residual)
        max_second = max(max_second, rep.constrained_second_derivative)
        gap = abs(rep.constrained_second_derivative - rep.closed_form_second_derivative)
        worst_gap = max(worst_gap, gap / max(1.0, abs(rep.closed_form_second_derivative)))
    ok = worst_res <= 1e-10 and max_second < 0.0 and worst_gap <= 1e-9
    return GateResult(7, "Lagrange gates", PASS if ok else FAIL, {
        "max_collinearity_residual": worst_res,
        "max_constrained_second_derivative": max_second,
        "max_assembled_vs_closed_rel_gap": worst_gap})


def gate_level_curve(s: VerifySettings) -> GateResult:
    T = s.steps(NOMINAL_K_STEPS)
    curve = optimizer.trace_level_curve(s.level, s.rho, [0.0, 0.05, 0.1, 0.2], budget=T,
                                        seed=s.stream(8))
    base = curve.points[0]
    detail = {"steps": T, "eta0": base.eta, "H0": base.H_value, "points": []}
    ok = curve.stopped_at is None
    if not ok:
        detail["stopped_at"] = curve.stopped_at
        detail["reason"] = curve.reason
    for p in curve.points[1:]:
        below = p.H_value <= base.H_value + s.sigma * p.H_error
        ok &= below and p.accepted(s.level)
        detail["points"].append({
            "alpha": p.alpha, "eta": p.eta, "K": p.K_value.mean, "K_stderr": p.K_value.stderr,
            "H": p.H_value, "H_error": p.H_error, "H_minus_H0": p.H_value - base.H_value})
    return GateResult(8, "level-curve optimality", _mc_status(ok, s), detail,
                      time_limit=600.0)


def gate_improvement(s: VerifySettings) -> GateResult:
    etas = np.linspace(0.0, 4.0, 41)
    alphas = np.linspace(0.0, 0.99, 100)
    zero_row = all(cf.improvement_ratio(0.0, e) == 0.0 for e in etas)
    positive = all(cf.improvement_ratio(a, e) > 0.0 for a in alphas[1:] for e in etas[1:])
    worst = 0.0
    for a in alphas:
        for e in etas:
            smoothed = cf.K0(a, e, 0.1) + cf.E0(a, e, 0.1)
            gain = cf.K_axis(e, 0.1) - smoothed
            worst = max(worst, abs(gain - cf.improvement_ratio(a, e) * smoothed))
    ok = zero_row and positive and worst <= 1e-10
    return GateResult(9, "improvement ratio", PASS if ok else FAIL, {
        "zero_at_alpha0": zero_row, "positive_off_axis": positive,
        "max_identity_gap": worst})


def _determinism_fingerprint(s: VerifySettings, workers: int) -> str:
    K = estimate_K_mc(ModelParams(0.1, 0.3, 0.5), 20_000, s.stream(10, 0))
    H = estimate_H_mc(ModelParams(0.1, 0.5, 0.5), 2_000, s.stream(10, 1))
    cells = survival.contour_grid([0.0, 0.4], [0.5, 1.0],
                                  survival.SolverConfig(n_grid=401), workers=workers)
    parts = [fmt(K.mean), fmt(K.stderr), fmt(H.mean), fmt(H.stderr)]
    parts += [fmt(c.H) for c in cells]
    return ",".join(parts)


def gate_determinism(s: VerifySettings) -> GateResult:
    a = _determinism_fingerprint(s, 1)
    b = _determinism_fingerprint(s, 1)
    c = _determinism_fingerprint(s, max(2, s.workers))
    ok = a == b == c
    return GateResult(10, "determinism", PASS if ok else FAIL,
                      {"repeat_identical": a == b, "worker_count_identical": a == c})


GATES = {
    1: gate_axis, 2: gate_K_mc, 3: gate_H_mc, 4: gate_solver_mc, 5: gate_gradients,
    6: gate_quadrature, 7: gate_lagrange, 8: gate_level_curve, 9: gate_improvement,
    10: gate_determinism,
}


def run_gate(number: int, s: VerifySettings) -> GateResult:
    fn = GATES[number]
    t0 = time.perf_counter()
    try:
        res = fn(s)
    except NotradeError as exc:
        res = GateResult(number, fn.__name__, FAIL, {"error": f"{type(exc).__name__}: {exc}"})
    res.seconds = time.perf_counter() - t0
    if res.time_limit is not None and res.seconds > res.time_limit and res.status == PASS:
        res.status = FAIL
        res.detail["time_limit_exceeded"] = True
    return res


def run_all(s: VerifySettings, gates=None) -> list[GateResult]:
    return [run_gate(k, s) for k in (gates or sorted(GATES))]


def fmt(x: float) -> str:
    """Round-trip decimal string for a float."""
    return format(float(x), ".17g")


def to_jsonable(value):
    """Floats become round-trip decimal strings; containers are converted recursively."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return fmt(value) if math.isfinite(value) else str(float(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    raise TypeError(f"cannot serialise {type(value).__name__}")
