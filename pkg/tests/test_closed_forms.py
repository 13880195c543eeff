import math

import numpy as np
import pytest

from notrade import closed_forms as cf
from notrade.errors import SingularityError, UnsupportedRegionError
from notrade.gaussian import gauss_pdf, gauss_sf
from notrade.process import ModelParams
from notrade.quadrature import E1_numeric, QuadConfig
from notrade.survival import compute_H

RHO = 0.1


def test_K_values():
    assert cf.K0(0, 0, RHO) == pytest.approx(0.0797884560802865, abs=1e-15)
    assert cf.K_axis(0, RHO) == cf.K0(0, 0, RHO)
    assert cf.K0(0.999999, 1, RHO) < 1e-3
    etas = np.linspace(0, 5, 51)
    assert all(a > b for a, b in zip([cf.K_axis(e, RHO) for e in etas],
                                     [cf.K_axis(e, RHO) for e in etas[1:]]))


def test_E0_vanishing():
    for e in (0.0, 0.5, 3.0):
        assert cf.E0(0.0, e, RHO) == 0.0
    assert cf.E0(0.5, 0.0, RHO) == 0.0
    assert cf.E0(0.5, 1.0, RHO) < 0.0


def test_grad_K():
    g = cf.grad_K_at0(0.0, RHO)
    assert g.d_alpha == 0.0 and g.d_eta == 0.0
    step, eta = 1e-4, 1.0
    smooth = lambda a: cf.K0(a, eta, RHO) + cf.E0(a, eta, RHO)  # noqa: E731
    # K0 + E0 is even-extended poorly at alpha < 0, so use a one-sided stencil
    fd_a = (-3 * smooth(0) + 4 * smooth(step) - smooth(2 * step)) / (2 * step)
    fd_e = (cf.K_axis(eta + step, RHO) - cf.K_axis(eta - step, RHO)) / (2 * step)
    g = cf.grad_K_at0(eta, RHO)
    assert abs(fd_a - g.d_alpha) < 1e-6
    assert abs(fd_e - g.d_eta) < 1e-6
    for e in np.linspace(0, 4, 21):
        g = cf.grad_K_at0(e, RHO)
        assert g.d_alpha <= 0 and g.d_eta <= 0


def test_hess_K():
    assert cf.hess_K_at0(1.0, RHO).d_ee == pytest.approx(0.0, abs=1e-17)
    assert cf.hess_K_at0(1 / math.sqrt(2), RHO).d_ae == pytest.approx(0.0, abs=1e-17)
    cfg = QuadConfig(abs_tol=1e-14)
    full = lambda a: cf.K0(a, 1, RHO) + cf.E0(a, 1, RHO) + E1_numeric(a, 1, RHO, cfg)  # noqa
    st = 0.01
    k = [full(j * st) for j in range(4)]
    fd = (2 * k[0] - 5 * k[1] + 4 * k[2] - k[3]) / st**2
    assert abs(fd - cf.hess_K_at0(1.0, RHO).d_aa) < 1e-4


def test_h_axis():
    assert cf.h_at0(0.0) == 2.0
    assert cf.h_at0(1.0) == pytest.approx(6.302974375, abs=1e-9)
    slope = cf.dh_dalpha_at0(1.0, 1.0) - cf.dh_dalpha_at0(1.0, 0.0)
    assert slope == pytest.approx(gauss_pdf(1.0) / gauss_sf(1.0), rel=1e-14)
    assert cf.dh_dalpha_at0(1.0, 3.0) - cf.dh_dalpha_at0(1.0, 2.0) == pytest.approx(slope)


def test_d2h_integral():
    f0 = gauss_pdf(0.0)
    assert cf.d2h_dalpha2_integral_at0(0.0) == pytest.approx(4 * f0 * (4 * f0**3 + f0), rel=1e-14)
    # survival solver: curvature of int_eta^inf h f dx = H * F(-eta) in alpha
    st, eta = 0.01, 0.5
    H = [compute_H(ModelParams(RHO, j * st, eta)) for j in range(4)]
    fd = (2 * H[0] - 5 * H[1] + 4 * H[2] - H[3]) / st**2 * gauss_sf(eta)
    assert abs(fd / cf.d2h_dalpha2_integral_at0(eta) - 1) < 0.02
    assert cf.hess_H_at0(eta).d_aa == pytest.approx(
        cf.d2h_dalpha2_integral_at0(eta) / gauss_sf(eta), rel=1e-15)


def test_H_values():
    assert cf.H_at0(1.0) == pytest.approx(6.3030, abs=5e-5)
    g = cf.grad_H_at0(1.0)
    assert g.d_alpha == pytest.approx(4.6521, abs=5e-5)
    for e in np.linspace(0, 4, 21):
        g = cf.grad_H_at0(e)
        assert g.d_alpha > 0 and g.d_eta > 0
    with pytest.raises(UnsupportedRegionError):
        cf.H_at0(9.0)


def test_lagrange():
    assert cf.lagrange_lambda(1.0, RHO) == pytest.approx(-198.637, abs=5e-3)
    with pytest.raises(SingularityError):
        cf.lagrange_lambda(0.0, RHO)
    for e in (0.3, 1.0, 2.5):
        gH, gK = cf.grad_H_at0(e), cf.grad_K_at0(e, RHO)
        lam = cf.lagrange_lambda(e, RHO)
        assert gH.d_alpha == pytest.approx(lam * gK.d_alpha, rel=1e-13)
        assert gH.d_eta == pytest.approx(lam * gK.d_eta, rel=1e-13)
        assert cf.collinearity_residual(gH, gK) < 1e-12


def test_tangent_is_tangent():
    for e in (0.2, 1.0, 2.0):
        v = cf.level_tangent(e)
        g = cf.grad_K_at0(e, RHO)
        assert abs(g.d_alpha * v[0] + g.d_eta * v[1]) < 1e-15


def test_constrained_second_derivative():
    for e in np.linspace(0.05, 8.0, 160):
        a = cf.constrained_second_derivative(e, RHO)
        b = cf.constrained_second_derivative_closed(e)
        assert a < 0
        assert abs(a - b) <= 1e-12 * abs(b)
    assert cf.constrained_second_derivative(1.0, 0.5) == pytest.approx(
        cf.constrained_second_derivative(1.0, 0.1), rel=1e-13)


def test_improvement_ratio():
    assert cf.improvement_ratio(0.0, 1.0) == 0.0
    a, e = 0.2, 1.0
    smoothed = cf.K0(a, e, RHO) + cf.E0(a, e, RHO)
    assert cf.improvement_ratio(a, e) == pytest.approx(
        (cf.K_axis(e, RHO) - smoothed) / smoothed, rel=1e-12)
    assert cf.improvement_ratio(0.2, 1.0) == pytest.approx(0.12997, abs=5e-5)
    assert cf.improvement_ratio(1e-8, 0.0) == pytest.approx(5e-17, rel=1e-6)
