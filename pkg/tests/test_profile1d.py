import math

import numpy as np
import pytest

from degengl.errors import ConfigError, FitError, InfeasibleError, ParameterError
from degengl.grid import Grid, p_laplacian_residual
from degengl.potential import EnergyParams, eval_potential, model_potential, tabulate_potential
from degengl.profile1d import (
    build_comparison_profile,
    comparison_profile,
    fit_decay_exponent,
    first_integral_defect,
    heteroclinic_profile,
    level_weight_integral,
    ode_residual,
    radial_field,
    supersolution_profile,
    supersolution_radius,
    supersolution_roots,
    tail_energy,
)


def test_comparison_profile_shape():
    u, du = comparison_profile(2.0, 4.0, 0.0)
    assert (u, du) == (0.0, 1.0)
    assert comparison_profile(2.0, 4.0, 0.5) == (0.5, 1.0)
    assert comparison_profile(2.0, 4.0, 3.0) == (1.0, 0.0)
    u, du = comparison_profile(2.0, 4.0, -3.0)
    assert u == pytest.approx(-1.0 + 4.0**-1.0)
    assert du == pytest.approx(4.0**-2.0)
    t = np.linspace(-50.0, 2.0, 500)
    values, _ = comparison_profile(3.0, 5.0, t)
    assert np.all(np.diff(values) >= 0.0)
    assert np.all(values > -1.0)


def test_comparison_profile_requires_m_above_p():
    with pytest.raises(ParameterError, match="m > p"):
        comparison_profile(2.0, 2.0, 0.0)


@pytest.mark.parametrize("p,m", [(2.0, 3.0), (2.0, 4.0), (3.0, 5.0)])
def test_fitted_decay_exponent_matches_p_over_m_minus_p(p, m):
    prof = build_comparison_profile(p, m, np.linspace(-1000.0, 1.0, 4001))
    assert fit_decay_exponent(prof, (-1000.0, -10.0)) == pytest.approx(p / (m - p), abs=1e-6)


def test_fit_decay_exponent_rejects_bad_windows():
    prof = build_comparison_profile(2.0, 4.0, np.linspace(-20.0, 1.0, 50))
    with pytest.raises(FitError):
        fit_decay_exponent(prof, (-5.0, 1.0))
    with pytest.raises(FitError, match="usable samples"):
        fit_decay_exponent(prof, (-11.0, -10.0))


@pytest.mark.parametrize("p,m", [(2.0, 3.0), (2.0, 4.0), (3.0, 5.0)])
def test_tail_energy_decays_like_t_to_minus_gamma(p, m):
    P = model_potential(m)
    gamma = p * m / (m - p) - 1.0
    Ts = np.geomspace(10.0, 1000.0, 9)
    energies = [tail_energy(p, m, T, P) for T in Ts]
    slope, _ = np.polyfit(np.log(Ts), np.log(energies), 1)
    assert -slope == pytest.approx(gamma, rel=0.1)
    ratio = tail_energy(p, m, 512.0, P) / tail_energy(p, m, 256.0, P)
    assert ratio == pytest.approx(2.0**-gamma, rel=0.05)


def test_tail_energy_matches_direct_quadrature():
    from scipy import integrate

    P = model_potential(4.0)

    def integrand(t):
        u, du = comparison_profile(2.0, 4.0, t)
        return du**2 + eval_potential(P, u)

    direct, _ = integrate.quad(integrand, -1e6, -10.0, limit=500, epsrel=1e-10, points=[-1e3, -1e2])
    # tail beyond 1e6 is below 1e-17
    assert tail_energy(2.0, 4.0, 10.0, P) == pytest.approx(direct, rel=1e-6)


def test_tail_energy_rejects_small_cutoff():
    with pytest.raises(ParameterError):
        tail_energy(2.0, 4.0, 0.5, model_potential(4.0))


def test_heteroclinic_matches_tanh_for_p_equal_m_equal_2():
    t = np.linspace(-5.0, 5.0, 1001)
    prof = heteroclinic_profile(2.0, model_potential(2.0), t)
    assert np.max(np.abs(prof.u - np.tanh(t))) <= 1e-6
    assert np.max(np.abs(prof.du - 1.0 / np.cosh(t) ** 2)) <= 1e-5


def test_heteroclinic_equipartition_and_monotonicity():
    P = model_potential(4.0)
    t = np.linspace(-30.0, 30.0, 601)
    prof = heteroclinic_profile(2.0, P, t)
    assert prof.u[300] == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.diff(prof.u) > 0)
    assert np.allclose(prof.du**2, eval_potential(P, prof.u), rtol=1e-6, atol=1e-14)
    assert math.isinf(prof.meta.a) and math.isinf(prof.meta.b)


def test_heteroclinic_reaches_the_wells_in_finite_time_when_m_below_p():
    P = model_potential(2.0)
    prof = heteroclinic_profile(3.0, P, np.linspace(-10.0, 10.0, 201))
    assert math.isfinite(prof.meta.a) and math.isfinite(prof.meta.b)
    assert prof.meta.a < 0 < prof.meta.b
    u, du = prof.evaluate(np.array([prof.meta.a - 1.0, prof.meta.b + 1.0]))
    assert np.allclose(u, [-1.0, 1.0])
    assert np.allclose(du, 0.0)


def test_tabulated_potential_must_stay_positive_inside():
    with pytest.raises(ConfigError, match="positive"):
        tabulate_potential(lambda t: (1 - t * t) ** 2 * t * t, lambda t: 2 * t * (1 - t * t) * (1 - 3 * t * t), 2.0)


def test_supersolution_roots_and_first_integral():
    P = model_potential(2.0)
    prof = supersolution_profile(0.2, 2.0, P, 0.05)
    meta = prof.meta
    assert meta.eta < 0.0
    assert -1.0 < meta.s0 < 0.0 < meta.s1 <= 1.0
    assert meta.s1 >= 0.8
    assert meta.a < 0.0 < meta.b
    assert np.all(np.diff(prof.u) > 0)
    assert prof.du[0] == 0.0 and prof.du[-1] == 0.0
    assert np.max(first_integral_defect(prof, P)) <= 1e-6
    assert np.max(np.abs(ode_residual(prof, P))) <= 1e-3


def test_supersolution_roots_infeasible_slopes():
    P = model_potential(2.0)
    with pytest.raises(InfeasibleError, match="epsilon"):
        supersolution_roots(0.2, 2.0, P, 0.0)
    with pytest.raises(InfeasibleError, match="too large"):
        supersolution_roots(0.2, 2.0, P, 10.0)


def test_supersolution_radius_heuristic():
    P = model_potential(2.0)
    prof = supersolution_profile(0.2, 2.0, P, 0.05)
    r = supersolution_radius(prof, 2)
    assert r + prof.meta.a > 0.0
    expected = 2.0 * float(np.max(prof.du)) / 0.05 - prof.meta.a
    assert r == pytest.approx(expected)
    with pytest.raises(ParameterError, match="supersolution"):
        supersolution_radius(build_comparison_profile(2.0, 4.0, np.linspace(-5, 1, 10)), 2)


def test_radial_supersolution_is_certified_on_a_strip():
    h = 0.05
    params = EnergyParams(n=2, p=2.0, m=2.0)
    P = model_potential(2.0)
    prof = supersolution_profile(0.2, 2.0, P, 0.05)
    meta = prof.meta
    r = 4.0 * supersolution_radius(prof, 2)
    shape = (int(math.ceil((meta.b - meta.a + 4 * h) / h)) + 4, 81)
    strip = Grid(shape=shape, h=h, origin=(r + meta.a - 2 * h, -2.0))
    v = radial_field(prof, strip, [0.0, 0.0], r)
    residual = p_laplacian_residual(v, params, P)
    dist = strip.distance([0.0, 0.0])
    annulus = residual.interior & (dist > r + meta.a + 2 * h) & (dist < r + meta.b - 2 * h)
    assert np.count_nonzero(annulus) > 100
    assert np.max(residual.values[annulus]) < 0.0


def test_level_weight_integral_grows_with_t():
    P = model_potential(4.0)
    values = [level_weight_integral(T, 2.0, 4.0, P) for T in (1.0, 5.0, 20.0)]
    assert values[0] > 0.0
    assert values[0] < values[1] < values[2]


def test_tail_slope_for_p2_m4_within_five_percent():
    P = model_potential(4.0)
    Ts = np.geomspace(10.0, 1000.0, 9)
    slope, _ = np.polyfit(np.log(Ts), np.log([tail_energy(2.0, 4.0, T, P) for T in Ts]), 1)
    assert -slope == pytest.approx(3.0, rel=0.05)
