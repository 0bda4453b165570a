import numpy as np
import pytest
from scipy import optimize

from degengl.errors import ConfigError, GeometryError, InconclusiveError
from degengl.grid import Field, Grid, ball_mask, p_laplacian_residual
from degengl.minimizer import (
    BoundaryCondition,
    FaceCondition,
    find_near_plus_one,
    initial_field,
    measured_zero,
    minimize,
    q_minimality_audit,
    sliding_supersolution_test,
)
from degengl.potential import EnergyParams, model_potential
from degengl.profile1d import heteroclinic_profile, radial_field, supersolution_profile


def _tanh_line(side: float, h: float) -> Field:
    grid = Grid.box(1, side, h)
    return Field(grid, np.tanh(grid.axis_coords(0)))


def _solve_tanh(side: float, h: float, tol: float = 1e-8):
    grid = Grid.box(1, side, h)
    params = EnergyParams(n=1, p=2.0, m=2.0)
    P = model_potential(2.0)
    u0 = Field(grid, np.clip(grid.axis_coords(0) / 2.0, -1.0, 1.0))
    return minimize(u0, BoundaryCondition.two_phase(), params, P, tol=tol)


def _sup_error(u: Field) -> float:
    x = u.grid.axis_coords(0)
    shift = float(measured_zero(u)[0])
    best = optimize.minimize_scalar(
        lambda s: float(np.max(np.abs(u.values - np.tanh(x - s)))),
        bounds=(shift - u.grid.h, shift + u.grid.h),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(best.fun)


def test_boundary_condition_validation():
    with pytest.raises(ConfigError, match="dirichlet"):
        FaceCondition(0, "lo", 1.5)
    with pytest.raises(ConfigError, match="side"):
        FaceCondition(0, "left", 1.0)
    with pytest.raises(ConfigError, match="unknown boundary"):
        BoundaryCondition.from_name("periodic")
    grid = Grid.box(2, 4.0, 0.5)
    with pytest.raises(ConfigError, match="out of range"):
        BoundaryCondition(faces=(FaceCondition(2, "lo", 1.0),)).pinned(grid)


def test_two_phase_pins_the_faces_of_axis_zero():
    grid = Grid.box(2, 4.0, 0.5)
    bc = BoundaryCondition.two_phase()
    pinned = bc.pinned(grid)
    assert pinned[0].all() and pinned[-1].all()
    assert not pinned[1:-1].any()
    applied = bc.apply(np.zeros(grid.shape), grid)
    assert np.all(applied[0] == -1.0) and np.all(applied[-1] == 1.0)
    assert not BoundaryCondition.natural().pinned(grid).any()


def test_frozen_cells_are_pinned():
    grid = Grid.box(2, 4.0, 0.5)
    frozen = np.zeros(grid.shape, dtype=bool)
    frozen[3, 3] = True
    assert BoundaryCondition(frozen=frozen).pinned(grid)[3, 3]


def test_plus_boundary_drives_random_data_to_plus_one():
    grid = Grid.box(2, 8.0, 0.5)
    params = EnergyParams(n=2, p=2.0, m=2.0)
    P = model_potential(2.0)
    u0 = initial_field(grid, "random", params, P, np.random.default_rng(4))
    u, report = minimize(u0, BoundaryCondition.uniform(1.0), params, P, tol=1e-8)
    assert report.converged
    assert np.allclose(u.values, 1.0, atol=1e-5)
    assert report.energy == pytest.approx(0.0, abs=1e-8)


def test_energy_trace_is_monotone_and_values_stay_in_range():
    grid = Grid.box(2, 10.0, 0.5)
    params = EnergyParams(n=2, p=2.0, m=4.0)
    P = model_potential(4.0)
    u0 = initial_field(grid, "random", params, P, np.random.default_rng(0))
    u, report = minimize(u0, BoundaryCondition.two_phase(), params, P, tol=1e-5, max_iter=3000)
    assert np.all(np.diff(report.energy_trace) <= 0.0)
    assert report.energy_trace[-1] < report.energy_trace[0]
    assert np.max(np.abs(u.values)) <= 1.0
    assert len(report.step_trace) == report.iterations


def test_minimize_reports_non_convergence():
    grid = Grid.box(1, 10.0, 0.1)
    params = EnergyParams(n=1, p=2.0, m=2.0)
    P = model_potential(2.0)
    u0 = Field(grid, np.clip(grid.axis_coords(0), -1.0, 1.0))
    _u, report = minimize(u0, BoundaryCondition.two_phase(), params, P, tol=1e-12, max_iter=3)
    assert not report.converged
    assert report.iterations <= 3
    assert report.to_json_dict(trace_stride=2)["trace_stride"] == 2


def test_one_dimensional_minimizer_is_close_to_tanh():
    u, report = _solve_tanh(20.0, 0.1)
    assert report.converged
    assert _sup_error(u) <= 2e-2


@pytest.mark.slow
def test_one_dimensional_minimizer_tanh_accuracy_and_order():
    errors = []
    hs = [0.2, 0.1, 0.05]
    for h in hs:
        u, report = _solve_tanh(20.0, h)
        assert report.converged
        errors.append(_sup_error(u))
    assert errors[-1] <= 5e-3
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    assert slope >= 1.7


def _continuum_residual(u: Field) -> float:
    """Max of 2u'' - W'(u) on |x| <= 5 with a fourth-order second difference."""
    v = u.values
    h = u.grid.h
    d2 = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h * h)
    core = v[2:-2]
    residual = 2 * d2 + 4 * core * (1 - core**2)
    x = u.grid.axis_coords(0)[2:-2]
    return float(np.max(np.abs(residual[np.abs(x) <= 5.0])))


@pytest.mark.slow
def test_minimizer_residual_decreases_at_second_order():
    params = EnergyParams(n=1, p=2.0, m=2.0)
    P = model_potential(2.0)
    hs = [0.2, 0.1, 0.05]
    residuals = []
    for h in hs:
        u, report = _solve_tanh(20.0, h)
        assert report.converged
        assert p_laplacian_residual(u, params, P).max_abs() <= 1e-6
        residuals.append(_continuum_residual(u))
    slope, _ = np.polyfit(np.log(hs), np.log(residuals), 1)
    assert slope >= 1.7


@pytest.mark.slow
def test_planar_energy_per_unit_length_is_stable():
    params = EnergyParams(n=2, p=2.0, m=4.0)
    P = model_potential(4.0)
    per_length = []
    for side in (20.0, 40.0):
        grid = Grid.box(2, side, 0.5)
        u0 = initial_field(grid, "planar", params, P)
        u, report = minimize(u0, BoundaryCondition.two_phase(), params, P, tol=1e-6)
        assert report.converged
        per_length.append(report.energy / side)
    assert per_length[1] == pytest.approx(per_length[0], rel=0.2)


def test_initial_field_kinds():
    grid = Grid.box(2, 8.0, 0.5)
    params = EnergyParams(n=2, p=2.0, m=4.0)
    P = model_potential(4.0)
    planar = initial_field(grid, "planar", params, P)
    assert np.all(np.diff(planar.values, axis=0) > 0)
    assert np.all(initial_field(grid, "plus", params, P).values == 1.0)
    assert np.all(initial_field(grid, "minus", params, P).values == -1.0)
    with pytest.raises(ConfigError, match="unknown initial field"):
        initial_field(grid, "checkerboard", params, P)


def test_measured_zero_of_tanh_line():
    u = _tanh_line(20.0, 0.05)
    assert measured_zero(u)[0] == pytest.approx(0.0, abs=1e-3)


def test_near_plus_one_on_tanh_line():
    u = _tanh_line(20.0, 0.05)
    found = find_near_plus_one(u, 0.5, anchor=[0.0])
    assert found.location[0] == pytest.approx(np.arctanh(0.5), abs=0.05)
    assert found.radius == pytest.approx(found.location[0], abs=0.1)
    closer = find_near_plus_one(u, 0.1, anchor=[0.0])
    assert closer.distance > found.distance
    assert closer.radius > found.radius


def test_near_plus_one_inconclusive_without_candidates():
    grid = Grid.box(1, 10.0, 0.5)
    with pytest.raises(InconclusiveError, match="inconclusive"):
        find_near_plus_one(Field.constant(grid, -1.0), 0.2, anchor=[0.0])
    plus = find_near_plus_one(Field.constant(grid, 1.0), 0.2, anchor=[0.0])
    assert plus.distance <= grid.h
    with pytest.raises(ConfigError):
        find_near_plus_one(Field.constant(grid, 1.0), 1.5)


def _supersolution():
    return supersolution_profile(0.2, 2.0, model_potential(2.0), 0.05)


def test_sliding_finds_no_contact_below_minus_one():
    prof = _supersolution()
    meta = prof.meta
    r = -meta.a
    support = r + meta.b
    grid = Grid.box(1, 2 * support + 20.0, 0.05)
    u = Field.constant(grid, -1.0)
    start = [float(grid.lower[0]) + support + 0.05]
    report = sliding_supersolution_test(u, prof, start, [start[0] + 1.0], r)
    assert not report.contact
    assert not report.violation
    assert max(report.margins) < 0.0


def test_sliding_touches_immediately_when_u_equals_v():
    prof = _supersolution()
    meta = prof.meta
    r = -meta.a
    support = r + meta.b
    grid = Grid.box(1, 2 * support + 20.0, 0.05)
    start = [float(grid.lower[0]) + support + 0.05]
    u = radial_field(prof, grid, start, r)
    report = sliding_supersolution_test(u, prof, start, [0.0], r)
    assert report.contact
    assert report.step == 0


def test_sliding_against_heteroclinic_stops_before_the_zero():
    prof = _supersolution()
    meta = prof.meta
    r = -meta.a
    support = r + meta.b
    grid = Grid.box(1, 2 * support + 20.0, 0.05)
    u = Field(grid, np.tanh(grid.axis_coords(0)))
    start = [float(grid.lower[0]) + support + 0.05]
    report = sliding_supersolution_test(u, prof, start, [0.0], r)
    assert report.contact
    assert report.center[0] < 0.0


def test_sliding_geometry_and_profile_checks():
    prof = _supersolution()
    grid = Grid.box(1, 10.0, 0.05)
    u = Field.constant(grid, -1.0)
    with pytest.raises(GeometryError):
        sliding_supersolution_test(u, prof, [0.0], [1.0], -prof.meta.a)
    with pytest.raises(ConfigError, match="too small"):
        sliding_supersolution_test(u, prof, [0.0], [1.0], -prof.meta.a - 1.0)
    hetero = heteroclinic_profile(2.0, model_potential(2.0), np.linspace(-3, 3, 11))
    with pytest.raises(ConfigError, match="supersolution"):
        sliding_supersolution_test(u, hetero, [0.0], [1.0], 1.0)


def test_q_audit_of_plus_one_gives_zero_ratio():
    grid = Grid.box(2, 20.0, 0.5)
    params = EnergyParams(n=2, p=2.0, m=4.0)
    region = ball_mask(grid, [0.0, 0.0], 5.0)
    report = q_minimality_audit(Field.constant(grid, 1.0), region, params, model_potential(4.0), 9)
    assert report.worst_ratio < 1e-10
    assert report.certifies()
    assert set(report.family_worst) == {"ramp", "comparison", "bump"}


def test_q_audit_certifies_a_converged_minimizer():
    u, report = _solve_tanh(20.0, 0.05)
    assert report.converged
    params = EnergyParams(n=1, p=2.0, m=2.0)
    region = ball_mask(u.grid, [0.0], 5.0)
    audit = q_minimality_audit(u, region, params, model_potential(2.0), 30, seed=1)
    assert audit.certifies(params.Q, 1e-5)


def test_q_audit_flags_a_noisy_field():
    grid = Grid.box(1, 20.0, 0.05)
    rng = np.random.default_rng(2)
    x = grid.axis_coords(0)
    u = Field.clamped(grid, np.tanh(x) + 0.3 * rng.normal(size=grid.shape))
    params = EnergyParams(n=1, p=2.0, m=2.0)
    region = ball_mask(grid, [0.0], 5.0)
    audit = q_minimality_audit(u, region, params, model_potential(2.0), 30)
    assert audit.worst_ratio > 1.0
    assert not audit.certifies(params.Q)


def test_q_audit_rejects_regions_touching_the_border():
    grid = Grid.box(1, 10.0, 0.5)
    params = EnergyParams(n=1, p=2.0, m=2.0)
    region = ball_mask(grid, [0.0], 5.0)
    with pytest.raises(GeometryError, match="strictly inside"):
        q_minimality_audit(Field.constant(grid, 1.0), region, params, model_potential(2.0), 3)
