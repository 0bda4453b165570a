import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from degengl.errors import ConfigError, DomainError, GeometryError
from degengl.grid import (
    Field,
    Grid,
    Region,
    annulus_mask,
    ball_mask,
    energy,
    energy_and_gradient,
    export_slice_csv,
    gradient,
    integrand_bound_ratios,
    interior_mask,
    load_snapshot,
    p_laplacian_residual,
    save_snapshot,
    snapshot_header_path,
)
from degengl.potential import EnergyParams, model_potential


def test_box_grid_is_centered():
    grid = Grid.box(2, 10.0, 0.5)
    assert grid.shape == (20, 20)
    assert np.allclose(grid.lower, -5.0)
    assert np.allclose(grid.upper, 5.0)
    assert grid.cell_volume == pytest.approx(0.25)
    assert Grid.box(3, (8.0, 4.0, 4.0), 1.0).shape == (8, 4, 4)


def test_grid_validation():
    with pytest.raises(ConfigError, match="spacing"):
        Grid(shape=(8,), h=0.0, origin=(0.0,))
    with pytest.raises(ConfigError, match="at least 4"):
        Grid(shape=(8, 3), h=1.0, origin=(0.0, 0.0))
    with pytest.raises(ConfigError):
        Grid(shape=(8, 8), h=1.0, origin=(0.0,))


def test_field_range_is_enforced():
    grid = Grid.box(1, 4.0, 0.5)
    with pytest.raises(DomainError):
        Field(grid, np.full(grid.shape, 1.5))
    nearly = Field(grid, np.full(grid.shape, 1.0 + 1e-13))
    assert np.all(nearly.values == 1.0)
    with pytest.raises(GeometryError):
        Field(grid, np.zeros(3))
    assert np.all(Field.clamped(grid, np.full(grid.shape, 7.0)).values == 1.0)


def test_ball_fits_with_half_cell_slack():
    grid = Grid.box(2, 80.0, 0.25)
    assert grid.ball_fits([0.0, 0.0], 40.0)
    assert not grid.ball_fits([0.0, 0.0], 40.5)
    with pytest.raises(GeometryError, match="leaves the box"):
        ball_mask(grid, [10.0, 0.0], 35.0)
    with pytest.raises(GeometryError, match="dimension"):
        grid.distance([0.0])


def test_region_algebra():
    grid = Grid.box(2, 20.0, 0.5)
    a = ball_mask(grid, [0.0, 0.0], 5.0)
    b = ball_mask(grid, [3.0, 0.0], 5.0)
    assert (a | b).count == a.count + b.count - (a & b).count
    assert (a - b).issubset(a)
    assert Region.empty(grid).count == 0
    assert Region.everywhere(grid).volume == pytest.approx(400.0)
    ring = annulus_mask(grid, [0.0, 0.0], 2.0, 5.0)
    assert ring.count == a.count - ball_mask(grid, [0.0, 0.0], 2.0).count


def test_forward_gradient_of_a_linear_field_is_exact():
    grid = Grid.box(2, 8.0, 0.5)
    x, y = grid.mesh()
    u = Field(grid, np.broadcast_to(0.01 * x + 0.02 * y, grid.shape))
    grad = gradient(u)
    assert np.allclose(grad[0], 0.01)
    assert np.allclose(grad[1], 0.02)


def test_constant_zero_field_energy_is_the_box_volume():
    grid = Grid.box(2, 6.0, 0.5)
    params = EnergyParams(n=2, p=2.0, m=2.0)
    value = energy(Field.constant(grid, 0.0), None, params, model_potential(2.0))
    assert value == pytest.approx(36.0, rel=1e-12)
    assert energy(Field.constant(grid, 1.0), None, params, model_potential(2.0)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000), split=st.floats(min_value=-3.0, max_value=3.0))
def test_energy_is_additive_over_disjoint_regions(seed, split):
    grid = Grid.box(2, 8.0, 0.5)
    rng = np.random.default_rng(seed)
    u = Field(grid, rng.uniform(-1.0, 1.0, grid.shape))
    params = EnergyParams(n=2, p=2.0, m=4.0)
    P = model_potential(4.0)
    x, _y = grid.mesh()
    left = Region(grid, np.broadcast_to(x < split, grid.shape).copy())
    right = Region.everywhere(grid) - left
    total = energy(u, None, params, P)
    assert energy(u, left, params, P) + energy(u, right, params, P) == pytest.approx(total, rel=1e-12)


@pytest.mark.parametrize("p,m", [(2.0, 4.0), (1.5, 3.0), (3.0, 5.0)])
def test_energy_gradient_matches_directional_difference(p, m):
    grid = Grid.box(2, 6.0, 0.5)
    params = EnergyParams(n=2, p=p, m=m)
    P = model_potential(m)
    rng = np.random.default_rng(7)
    step = 1e-6 if p == 2.0 else 1e-5
    for _ in range(20):
        base = rng.uniform(-0.9, 0.9, grid.shape)
        direction = rng.normal(size=grid.shape)
        direction /= np.max(np.abs(direction))
        _value, deriv = energy_and_gradient(Field(grid, base), params, P)
        plus = energy(Field(grid, base + step * direction), None, params, P)
        minus = energy(Field(grid, base - step * direction), None, params, P)
        numeric = (plus - minus) / (2 * step)
        exact = float(np.sum(deriv * direction))
        assert exact == pytest.approx(numeric, rel=1e-6 if p == 2.0 else 1e-4, abs=1e-8)


def test_p_laplacian_residual_is_the_second_difference_for_p_2():
    grid = Grid.box(1, 10.0, 0.1)
    x = grid.axis_coords(0)
    u = Field(grid, 0.001 * x**2)
    params = EnergyParams(n=1, p=2.0, m=2.0)
    P = model_potential(2.0)
    residual = p_laplacian_residual(u, params, P)
    expected = 2.0 * 0.002 + 4.0 * u.values * (1.0 - u.values**2)
    assert np.allclose(residual.values[residual.interior], expected[residual.interior], atol=1e-9)
    assert residual.max_abs() == pytest.approx(np.max(np.abs(expected[residual.interior])), rel=1e-6)


def test_residual_of_sampled_tanh_is_second_order():
    params = EnergyParams(n=1, p=2.0, m=2.0)
    P = model_potential(2.0)
    hs = [0.2, 0.1, 0.05]
    errors = []
    for h in hs:
        grid = Grid.box(1, 20.0, h)
        u = Field(grid, np.tanh(grid.axis_coords(0)))
        errors.append(p_laplacian_residual(u, params, P).max_abs())
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    assert slope >= 1.7
    assert errors[-1] < 1e-2


def test_interior_mask_drops_border_layers():
    grid = Grid.box(2, 4.0, 0.5)
    mask = interior_mask(grid)
    assert not mask[0].any()
    assert not mask[-2:].any()
    assert not mask[:, 0].any()
    assert mask[1:-2, 1:-2].all()


def test_integrand_bound_ratios_for_the_model():
    grid = Grid.box(2, 6.0, 0.5)
    rng = np.random.default_rng(3)
    u = Field(grid, rng.uniform(-1.0, 1.0, grid.shape))
    params = EnergyParams(n=2, p=2.0, m=3.0)
    lower, upper = integrand_bound_ratios(u, params, model_potential(3.0))
    assert lower >= 1.0 - 1e-12
    assert upper <= 2.0**3 + 1e-12


def test_snapshot_round_trip(tmp_path):
    grid = Grid.box(2, 5.0, 0.5)
    u = Field(grid, np.random.default_rng(1).uniform(-1.0, 1.0, grid.shape))
    target = save_snapshot(u, tmp_path / "field.f64")
    header = json.loads(snapshot_header_path(target).read_text(encoding="utf-8"))
    assert header["format"] == "degengl-field-v1"
    assert header["shape"] == [10, 10]
    loaded = load_snapshot(target)
    assert loaded.grid == grid
    assert np.array_equal(loaded.values, u.values)


def test_snapshot_rejects_foreign_headers(tmp_path):
    grid = Grid.box(1, 4.0, 0.5)
    target = save_snapshot(Field.constant(grid, 0.5), tmp_path / "u.f64")
    snapshot_header_path(target).write_text(json.dumps({"format": "other"}), encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown format"):
        load_snapshot(target)
    with pytest.raises(ConfigError, match="not found"):
        load_snapshot(tmp_path / "missing.f64")


def test_export_slice_csv_blocks(tmp_path):
    grid = Grid.box(3, 4.0, 1.0)
    u = Field.constant(grid, 0.25)
    lines = export_slice_csv(u, tmp_path / "slice.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x,y,u"
    assert sum(1 for line in lines if not line) == 4
    assert len(lines) == 1 + 4 * 4 + 4
