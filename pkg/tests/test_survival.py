import numpy as np
import pytest

from notrade import closed_forms as cf
from notrade import survival as sv
from notrade.errors import ParameterError, TruncationError
from notrade.gaussian import gauss_sf
from notrade.process import ModelParams, estimate_H_mc, survival_samples
from notrade.rng import RngStream


def P(alpha, eta):
    return ModelParams(rho=0.1, alpha=alpha, eta=eta)


def test_config_validation():
    with pytest.raises(ParameterError):
        sv.SolverConfig(n_grid=200)
    with pytest.raises(ParameterError):
        sv.SolverConfig(n_grid=101)
    with pytest.raises(ParameterError):
        sv.SolverConfig(beta_schedule=(0.1, 0.2))
    with pytest.raises(ParameterError):
        sv.SolverConfig(beta_schedule=(0.1, -0.01))
    with pytest.raises(ParameterError):
        sv.SolverConfig(method="newton")


def test_phi_beta():
    y = np.linspace(-2, 5, 701)
    phi = sv.phi_beta(y, 0.1)
    assert np.all(phi[y < 0] == 1.0)
    assert np.allclose(phi[y > 1], np.exp(-0.1 * y[y > 1]))
    assert np.all(np.diff(phi) <= 1e-15)
    # continuity of value at both ends of the bridge
    assert sv.phi_beta(np.array([1.0]), 0.1)[0] == pytest.approx(np.exp(-0.1))


def test_apply_T_beta_affine_part():
    grid = sv.solve_h(P(0.4, 0.5), sv.SolverConfig(n_grid=401))
    zero = sv.HGrid(grid.eta, grid.alpha, grid.nodes, np.zeros_like(grid.nodes))
    assert np.all(sv.apply_T_beta(zero, 0.05).values == 1.0)


def test_apply_T_beta_constant_on_axis():
    grid = sv.solve_h(P(0.0, 1.0), sv.SolverConfig(n_grid=401))
    const = sv.HGrid(1.0, 0.0, grid.nodes, np.full_like(grid.nodes, 3.0))
    out = sv.apply_T_beta(const, 0.0).values
    # kernel mass on [-eta, x_max] is F(-eta) minus the tail beyond x_max
    mass = gauss_sf(-1.0) - gauss_sf(grid.x_max)
    assert np.allclose(out, 1 + 3.0 * mass, atol=1e-9)


def test_contraction_beta():
    grid = sv.solve_h(P(0.5, 1.0), sv.SolverConfig(n_grid=401))
    rng = np.random.default_rng(0)
    g1 = sv.HGrid(1.0, 0.5, grid.nodes, rng.uniform(0, 10, grid.nodes.size))
    g2 = sv.HGrid(1.0, 0.5, grid.nodes, rng.uniform(0, 10, grid.nodes.size))
    d_out = np.max(np.abs(sv.apply_T_beta(g1, 0.05).values - sv.apply_T_beta(g2, 0.05).values))
    d_in = np.max(np.abs(g1.values - g2.values))
    assert d_out / d_in < 1.0


def test_apply_T_beta_rejects_bad_grid():
    g = sv.HGrid(1.0, 0.2, np.linspace(0.0, 12.0, 11), np.ones(11))
    with pytest.raises(ParameterError):
        sv.apply_T_beta(g, 0.1)


def test_axis_solution():
    for eta in (0.25, 0.5, 1.0):
        g = sv.solve_h(P(0.0, eta))
        assert np.max(np.abs(g.values - cf.h_at0(eta))) < 1e-8
        assert g.residual <= 1e-9
        assert np.all(g.values >= 1.0)


def test_compute_H_axis():
    assert abs(sv.compute_H(P(0.0, 1.0)) - 6.302974375) < 1e-6
    assert abs(sv.compute_H(P(0.0, 0.0)) - 2.0) < 1e-8


def test_H_increasing_in_alpha():
    H = [sv.compute_H(P(a, 1.0)) for a in (0.0, 0.2, 0.4, 0.6)]
    assert all(a < b for a, b in zip(H, H[1:]))


def test_monotone_in_x():
    g = sv.solve_h(P(0.5, 0.5))
    assert g.is_monotone
    assert g.values[-1] > g.values[0]


def test_monotone_coupling_mc():
    # same innovations from two starts: the higher start never exits first
    params = P(0.5, 0.5)
    lo = sv.evaluate_h(sv.solve_h(params), [0.6, 2.5])
    assert lo[1] > lo[0]
    taus = survival_samples(params, 100_000, RngStream(5))
    assert taus.min() >= 1


def test_grid_refinement():
    a = sv.compute_H(P(0.5, 1.0), sv.SolverConfig(n_grid=2001))
    b = sv.compute_H(P(0.5, 1.0), sv.SolverConfig(n_grid=4001))
    assert abs(a - b) <= 1e-6


def test_continuation_matches_direct():
    cfg = sv.SolverConfig(method="continuation", n_grid=1001)
    g = sv.solve_h(P(0.5, 1.0), cfg)
    direct = sv.solve_h(P(0.5, 1.0), sv.SolverConfig(n_grid=1001))
    assert np.max(np.abs(g.values - direct.values)) < 1e-7
    assert len(g.damped_H) == len(cfg.beta_schedule)
    damped = [h for _, h in g.damped_H]
    assert all(a < b for a, b in zip(damped, damped[1:]))
    # extrapolating in beta leaves a visible bias; kept as a diagnostic only
    assert abs(sv.extrapolated_H(g) - sv.compute_H(P(0.5, 1.0))) < 0.1


def test_truncation_error():
    with pytest.raises(TruncationError):
        sv.solve_h(P(0.9, 1.0), sv.SolverConfig(x_max=12.0))
    g = sv.solve_h(P(0.9, 1.0))
    assert g.x_max >= sv.required_x_max(0.9)
    assert sv.escaping_mass(0.9, g.x_max) <= sv.TAIL_MASS


def test_domain_checks():
    with pytest.raises(ParameterError):
        sv.solve_h(P(0.5, 6.5))


def test_log_growth_envelope():
    g = sv.solve_h(P(0.7, 0.5))
    a1, a2 = sv.log_growth_envelope(g)
    mask = g.nodes >= 2.0
    assert np.all(g.values[mask] <= a1 + a2 * np.log(g.nodes[mask]) + 1e-12)
    assert a2 >= 0


def test_solver_vs_mc():
    params = P(0.3, 0.5)
    est = estimate_H_mc(params, 200_000, RngStream(13))
    assert est.within(sv.compute_H(params))


def test_fd_gradient():
    g = sv.fd_grad_H(1.0)
    exact = cf.grad_H_at0(1.0)
    assert abs(g.d_alpha / exact.d_alpha - 1) < 0.02
    g = sv.fd_grad_H(0.5)
    assert abs(g.d_eta / cf.grad_H_at0(0.5).d_eta - 1) < 0.02
    with pytest.raises(ParameterError):
        sv.fd_grad_H(1.0, step=0.1)


def test_fd_order():
    exact = cf.grad_H_at0(1.0).d_alpha
    e1 = abs(sv.fd_grad_H(1.0, step=1e-2).d_alpha - exact)
    e2 = abs(sv.fd_grad_H(1.0, step=5e-3).d_alpha - exact)
    assert e1 / e2 >= 3


def test_contour_grid():
    cfg = sv.SolverConfig(n_grid=401)
    cells = sv.contour_grid([0.0, 0.3, 0.6], [0.5, 1.0], cfg)
    assert [(c.alpha, c.eta) for c in cells] == [
        (a, e) for a in (0.0, 0.3, 0.6) for e in (0.5, 1.0)]
    for c in cells[:2]:
        assert abs(c.H - 1 / gauss_sf(c.eta)) < 1e-6
    assert sv.monotonicity_flags(cells, 3, 2) == []
    threaded = sv.contour_grid([0.0, 0.3, 0.6], [0.5, 1.0], cfg, workers=3)
    assert [c.H for c in threaded] == [c.H for c in cells]


def test_contour_marks_failures():
    cells = sv.contour_grid([0.5], [1.0, 7.0], sv.SolverConfig(n_grid=401))
    assert cells[0].ok
    assert cells[1].status == "ParameterError" and np.isnan(cells[1].H)
    with pytest.raises(ParameterError):
        sv.contour_grid([], [1.0])


def test_monotonicity_flags_detect():
    cells = [sv.ContourCell(0.0, 1.0, 5.0, "ok"), sv.ContourCell(0.5, 1.0, 4.0, "ok")]
    assert len(sv.monotonicity_flags(cells, 2, 1)) == 1
