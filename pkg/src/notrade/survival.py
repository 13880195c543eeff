"""Expected survival time of the smoothed signal.

For a start ``x > -eta`` the expected number of steps ``h(x)`` until the
smoothed signal first falls to or below ``-eta`` solves

    h(x) = 1 + int_{-eta}^{inf} h(y) k(x, y) dy,
    k(x, y) = f((y - alpha x) / s) / s,   s = sqrt(1 - alpha**2).

The equation is discretised on a uniform grid over ``[-eta, x_max]`` with
composite Simpson weights (Nystrom method).  By default the truncated linear
system is solved directly; ``method="continuation"`` runs the damped
fixed-point iteration with multiplier ``phi_beta`` over a decreasing beta
schedule, then finishes with undamped iterations from the last warm start.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .closed_forms import GradPair
from .errors import ConvergenceError, NotradeError, ParameterError, TruncationError
from .gaussian import gauss_inv_cdf, gauss_pdf, gauss_sf
from .process import ModelParams

ETA_MAX = 6.0
ALPHA_MAX = 0.99
TAIL_MASS = 1e-12
MONOTONE_SLACK = 1e-8
# grid spacing never coarser than this fraction of the kernel width
SPACING_FRACTION = 1.0 / 6.0
# tiny margin so rounding never puts the edge mass just above TAIL_MASS
_REACH_Z = -float(gauss_inv_cdf(TAIL_MASS)) * (1.0 + 1e-9)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class SolverConfig:
    """Discretisation and iteration settings.

    ``x_max=None`` picks the smallest upper edge (at least 12) that keeps the
    one-step kernel mass leaving the grid below 1e-12; an explicit value is
    checked against the same bound.  ``n_grid`` is a minimum: the grid is
    refined when the spacing would exceed a sixth of the kernel width.
    """

    x_max: float | None = None
    n_grid: int = 2001
    beta_schedule: tuple[float, ...] = (0.2, 0.1, 0.05, 0.02, 0.01, 0.005)
    fp_tol: float = 1e-10
    max_iter: int = 100_000
    method: str = "direct"

    def __post_init__(self):
        if self.n_grid < 201 or self.n_grid % 2 == 0:
            raise ParameterError("n_grid must be odd and at least 201")
        b = tuple(float(v) for v in self.beta_schedule)
        if not b or any(v <= 0.0 for v in b) or any(x <= y for x, y in zip(b, b[1:])):
            raise ParameterError("beta_schedule must be positive and strictly decreasing")
        object.__setattr__(self, "beta_schedule", b)
        if not self.fp_tol > 0.0:
            raise ParameterError("fp_tol must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be positive")
        if self.method not in ("direct", "continuation"):
            raise ParameterError(f"unknown method {self.method!r}")
        if self.x_max is not None and not math.isfinite(self.x_max):
            raise ParameterError("x_max must be finite")


@dataclass
class HGrid:
    eta: float
    alpha: float
    nodes: np.ndarray
    values: np.ndarray
    beta_used: float = 0.0
    iterations: int = 0
    residual: float = float("nan")
    # (beta, H) pairs from the damped stages of the continuation method
    damped_H: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.nodes.shape != self.values.shape or self.nodes.ndim != 1:
            raise ParameterError("nodes and values must be 1-D arrays of one length")

    @property
    def x_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def monotone_violation(self) -> float:
        """Largest decrease between neighbouring nodes (0 when non-decreasing)."""
        return float(max(0.0, -np.min(np.diff(self.values))))

    @property
    def is_monotone(self) -> bool:
        return self.monotone_violation <= MONOTONE_SLACK


def _check_params(alpha: float, eta: float) -> None:
    if not 0.0 <= alpha <= ALPHA_MAX:
        raise ParameterError(f"solver needs alpha in [0, {ALPHA_MAX}], got {alpha}")
    if not 0.0 <= eta <= ETA_MAX:
        raise ParameterError(f"solver needs eta in [0, {ETA_MAX}], got {eta}")


def required_x_max(alpha: float) -> float:
    """Smallest edge with one-step kernel mass beyond it below 1e-12 from every node."""
    s = math.sqrt(1.0 - alpha * alpha)
    return _REACH_Z * s / (1.0 - alpha)


def escaping_mass(alpha: float, x_max: float) -> float:
    # worst node is x_max itself since the kernel mean alpha*x grows with x
    s = math.sqrt(1.0 - alpha * alpha)
    return float(gauss_sf(x_max * (1.0 - alpha) / s))


def make_grid(alpha: float, eta: float, cfg: SolverConfig) -> np.ndarray:
    _check_params(alpha, eta)
    if cfg.x_max is None:
        x_max = max(12.0, required_x_max(alpha))
    else:
        x_max = float(cfg.x_max)
        if x_max <= -eta + 1.0:
            raise TruncationError(f"x_max={x_max} leaves no room above -eta")
        mass = escaping_mass(alpha, x_max)
        if mass > TAIL_MASS:
            raise TruncationError(
                f"x_max={x_max} loses kernel mass {mass:.3g} > {TAIL_MASS:g}; "
                f"need x_max >= {required_x_max(alpha):.4g}")
    s = math.sqrt(1.0 - alpha * alpha)
    span = x_max + eta
    n = max(cfg.n_grid, math.ceil(span / (SPACING_FRACTION * s)) + 1)
    n += 1 - n % 2
    return np.linspace(-eta, x_max, n)


def simpson_weights(nodes: np.ndarray) -> np.ndarray:
    n = len(nodes)
    if n < 3 or n % 2 == 0:
        raise ParameterError("Simpson weights need an odd number of nodes >= 3")
    dx = (nodes[-1] - nodes[0]) / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dx / 3.0)


def phi_beta(y: np.ndarray, beta: float) -> np.ndarray:
    """Damping multiplier: 1 below 0, exp(-beta y) above 1, cubic Hermite between."""
    y = np.asarray(y, dtype=np.float64)
    out = np.where(y < 0.0, 1.0, np.exp(-beta * y))
    mid = (y >= 0.0) & (y <= 1.0)
    t = y[mid]
    end = math.exp(-beta)
    slope = -beta * end
    # end-point values (1, end) and slopes (0, slope)
    out[mid] = ((2 * t**3 - 3 * t**2 + 1)
                + (-2 * t**3 + 3 * t**2) * end
                + (t**3 - t**2) * slope)
    return out


def kernel_rows(points: np.ndarray, nodes: np.ndarray, alpha: float) -> np.ndarray:
    """k(points[i], nodes[j]) as a dense matrix."""
    s = math.sqrt(1.0 - alpha * alpha)
    z = (nodes[None, :] - alpha * np.asarray(points)[:, None]) / s
    return np.exp(-0.5 * z * z) * (1.0 / (s * math.sqrt(2.0 * math.pi)))


class _Operator:
    """Discretised h -> 1 + K h on a fixed grid."""

    def __init__(self, alpha: float, nodes: np.ndarray):
        self.alpha = alpha
        self.nodes = nodes
        self.weights = simpson_weights(nodes)
        self.matrix = kernel_rows(nodes, nodes, alpha) * self.weights[None, :]

    def apply(self, values: np.ndarray, beta: float = 0.0) -> np.ndarray:
        if beta > 0.0:
            values = values * phi_beta(self.nodes, beta)
        return 1.0 + self.matrix @ values

    def residual(self, values: np.ndarray) -> float:
        return float(np.max(np.abs(self.apply(values) - values)))

    def solve(self) -> np.ndarray:
        a = -self.matrix
        a[np.diag_indices_from(a)] += 1.0
        return linalg.solve(a, np.ones(len(self.nodes)), overwrite_a=True,
                            check_finite=False)


def apply_T_beta(grid: HGrid, beta: float) -> HGrid:
    """One application of the damped operator to the values on ``grid``."""
    if beta < 0.0:
        raise ParameterError("beta must be >= 0")
    nodes = grid.nodes
    if len(nodes) < 3 or not np.isclose(nodes[0], -grid.eta, rtol=0.0, atol=1e-12):
        raise ParameterError("grid must start at -eta")
    if np.ptp(np.diff(nodes)) > 1e-9 * (nodes[-1] - nodes[0]):
        raise ParameterError("grid must be uniform")
    op = _Operator(grid.alpha, nodes)
    return HGrid(eta=grid.eta, alpha=grid.alpha, nodes=nodes,
                 values=op.apply(grid.values, beta), beta_used=beta)


def _iterate(op: _Operator, values: np.ndarray, beta: float, tol: float,
             budget: int) -> tuple[np.ndarray, int]:
    """Picard iteration, stopped on the a-posteriori error estimate."""
    prev_step = math.inf
    for it in range(1, budget + 1):
        nxt = op.apply(values, beta)
        step = float(np.max(np.abs(nxt - values)))
        values = nxt
        rate = step / prev_step if prev_step > 0.0 else 0.0
        prev_step = step
        # distance to the fixed point <= step * rate / (1 - rate)
        if step <= tol and (rate >= 1.0 or step * rate <= tol * (1.0 - rate)):
            return values, it
        if step == 0.0:
            return values, it
    raise ConvergenceError(f"no convergence within {budget} iterations at beta={beta}")


def _H_from(op: _Operator, values: np.ndarray, eta: float, panels: int = 40) -> float:
    x_max = float(op.nodes[-1])
    edges = np.linspace(eta, x_max, panels + 1)
    half = 0.5 * np.diff(edges)
    q = (edges[:-1, None] + half[:, None] * (_GL_NODES[None, :] + 1.0)).ravel()
    qw = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    hq = 1.0 + kernel_rows(q, op.nodes, op.alpha) @ (op.weights * values)
    return float(np.dot(hq * gauss_pdf(q), qw) / gauss_sf(eta))


def _solve(params: ModelParams, cfg: SolverConfig) -> tuple[HGrid, _Operator]:
    alpha, eta = float(params.alpha), float(params.eta)
    nodes = make_grid(alpha, eta, cfg)
    op = _Operator(alpha, nodes)
    grid = HGrid(eta=eta, alpha=alpha, nodes=nodes, values=np.empty_like(nodes))
    if cfg.method == "direct":
        grid.values = op.solve()
        grid.iterations = 1
    else:
        values = np.full(len(nodes), 1.0 / gauss_sf(eta))
        used = 0
        for beta in cfg.beta_schedule:
            values, it = _iterate(op, values, beta, cfg.fp_tol, cfg.max_iter - used)
            used += it
            grid.damped_H.append((beta, _H_from(op, values, eta)))
        values, it = _iterate(op, values, 0.0, cfg.fp_tol, cfg.max_iter - used)
        grid.values = values
        grid.iterations = used + it
    grid.residual = op.residual(grid.values)
    if not grid.residual <= 10.0 * cfg.fp_tol:
        raise ConvergenceError(f"fixed-point defect {grid.residual:.3g} above tolerance")
    return grid, op


def solve_h(params: ModelParams, cfg: SolverConfig = SolverConfig()) -> HGrid:
    return _solve(params, cfg)[0]


def evaluate_h(grid: HGrid, x) -> np.ndarray:
    """h at arbitrary points in [-eta, x_max] by Nystrom interpolation."""
    op = _Operator(grid.alpha, grid.nodes)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x < grid.nodes[0] - 1e-12) or np.any(x > grid.x_max + 1e-12):
        raise ParameterError("evaluation points must lie in [-eta, x_max]")
    return 1.0 + kernel_rows(x, grid.nodes, grid.alpha) @ (op.weights * grid.values)


def compute_H(params: ModelParams, cfg: SolverConfig = SolverConfig()) -> float:
    """Expected survival time from a start distributed as f above eta."""
    grid, op = _solve(params, cfg)
    return _H_from(op, grid.values, grid.eta)


def extrapolated_H(grid: HGrid) -> float:
    """Linear extrapolation to beta = 0 from the last two damped stages."""
    if len(grid.damped_H) < 2:
        raise ParameterError("needs a continuation solve with two or more stages")
    (b1, h1), (b2, h2) = grid.damped_H[-2:]
    return h2 - b2 * (h1 - h2) / (b1 - b2)


def log_growth_envelope(grid: HGrid, start: float = 2.0) -> tuple[float, float]:
    """Constants (a1, a2) with h(x) <= a1 + a2 log(x) on the grid for x >= start.

    ``a2`` is the least-squares slope against log(x); ``a1`` is then the
    smallest intercept making the bound hold at every node.
    """
    mask = grid.nodes >= start
    if np.count_nonzero(mask) < 2:
        raise ParameterError("too few nodes above start")
    lx = np.log(grid.nodes[mask])
    hv = grid.values[mask]
    a2 = max(float(np.polyfit(lx, hv, 1)[0]), 0.0)
    a1 = float(np.max(hv - a2 * lx))
    return a1, a2


def fd_grad_H(eta: float, cfg: SolverConfig = SolverConfig(), step: float = 1e-3,
              rho: float = 0.5) -> GradPair:
    """Finite-difference gradient of H at alpha = 0.

    ``rho`` only satisfies ModelParams validation; H does not depend on it.
    """
    if not 1e-4 <= step <= 1e-2:
        raise ParameterError("step must lie in [1e-4, 1e-2]")
    if eta - step < 0.0:
        raise ParameterError("eta must be at least step for the central difference")

    def H(a, e):
        return compute_H(ModelParams(rho=rho, alpha=a, eta=e), cfg)

    h0 = H(0.0, eta)
    d_alpha = (-3.0 * h0 + 4.0 * H(step, eta) - H(2.0 * step, eta)) / (2.0 * step)
    d_eta = (H(0.0, eta + step) - H(0.0, eta - step)) / (2.0 * step)
    return GradPair(d_alpha=d_alpha, d_eta=d_eta)


@dataclass(frozen=True)
class ContourCell:
    alpha: float
    eta: float
    H: float
    status: str  # "ok" or an error class name
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _cell(args) -> ContourCell:
    alpha, eta, cfg = args
    try:
        value = compute_H(ModelParams(rho=0.5, alpha=alpha, eta=eta), cfg)
    except NotradeError as exc:
        return ContourCell(alpha, eta, float("nan"), type(exc).__name__, str(exc))
    return ContourCell(alpha, eta, value, "ok")


def contour_grid(alpha_grid, eta_grid, cfg: SolverConfig = SolverConfig(),
                 workers: int = 1) -> list[ContourCell]:
    """H over the product grid, alpha-major; failed cells are kept and marked."""
    alphas = [float(a) for a in np.atleast_1d(alpha_grid)]
    etas = [float(e) for e in np.atleast_1d(eta_grid)]
    if not alphas or not etas:
        raise ParameterError("grids must be non-empty")
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    tasks = [(a, e, cfg) for a in alphas for e in etas]
    if workers == 1:
        return [_cell(t) for t in tasks]
    # LAPACK releases the GIL; map keeps task order
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell, tasks))


def monotonicity_flags(cells: list[ContourCell], n_alpha: int, n_eta: int,
                       slack: float = 1e-8) -> list[str]:
    """Describe every place where H decreases along alpha or along eta."""
    if len(cells) != n_alpha * n_eta:
        raise ParameterError("cell count does not match grid shape")
    table = np.array([c.H for c in cells]).reshape(n_alpha, n_eta)
    flags = []
    for i in range(n_alpha):
        for j in range(n_eta):
            here = table[i, j]
            if i + 1 < n_alpha and table[i + 1, j] < here - slack * abs(here):
                flags.append(f"H decreases in alpha at eta={cells[j].eta:g} "
                             f"between alpha={cells[i * n_eta].alpha:g} and "
                             f"{cells[(i + 1) * n_eta].alpha:g}")
            if j + 1 < n_eta and table[i, j + 1] < here - slack * abs(here):
                flags.append(f"H decreases in eta at alpha={cells[i * n_eta].alpha:g} "
                             f"between eta={cells[j].eta:g} and {cells[j + 1].eta:g}")
    return flags
