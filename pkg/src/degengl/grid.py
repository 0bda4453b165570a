"""Uniform lattices, fields, regions and the discrete energy.

The energy uses forward differences per axis; at the last cell of an axis
the difference of the previous pair is reused. The residual is built from
the transpose of that operator, so p_laplacian_residual equals minus the
exact gradient of ``energy`` divided by hⁿ.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, GeometryError
from .potential import EnergyParams, Potential, eval_potential, eval_potential_deriv

_RANGE_SLACK = 1e-12
_SNAPSHOT_FORMAT = "degengl-field-v1"


@dataclass(frozen=True)
class Grid:
    shape: tuple[int, ...]
    h: float
    origin: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ConfigError(f"invalid grid spacing h={self.h!r}: expected h > 0")
        if len(self.shape) != len(self.origin) or not 1 <= len(self.shape) <= 3:
            raise ConfigError(f"invalid grid: shape {self.shape!r} and origin {self.origin!r} must share dimension 1-3")
        if any(int(size) < 4 for size in self.shape):
            raise ConfigError(f"invalid grid shape {self.shape!r}: every axis needs at least 4 cells")

    @classmethod
    def box(cls, n: int, side: float | tuple[float, ...], h: float) -> Grid:
        """Cells of spacing h tiling a box centered at the origin."""
        sides = (float(side),) * n if np.ndim(side) == 0 else tuple(float(s) for s in side)
        if len(sides) != n:
            raise ConfigError(f"invalid box {side!r} for dimension {n}")
        shape = tuple(max(int(round(s / h)), 4) for s in sides)
        origin = tuple(-0.5 * (count - 1) * h for count in shape)
        return cls(shape=shape, h=float(h), origin=origin)

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin) - 0.5 * self.h

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.shape) - 0.5) * self.h

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.h * np.arange(self.shape[axis])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis_coords(k) for k in range(self.n)), indexing="ij", sparse=True)

    def distance(self, center) -> np.ndarray:
        c = self._center(center)
        total = np.zeros(self.shape)
        for axis, coords in enumerate(self.mesh()):
            total = total + (coords - c[axis]) ** 2
        return np.sqrt(total)

    def ball_fits(self, center, R: float) -> bool:
        """B_R(center) inside the box, up to half a cell."""
        c = self._center(center)
        slack = 0.5 * self.h + 1e-9
        return bool(np.all(c - R >= self.lower - slack) and np.all(c + R <= self.upper + slack))

    def require_ball(self, center, R: float) -> None:
        if not self.ball_fits(center, R):
            raise GeometryError(
                f"ball of radius {R!r} at {tuple(self._center(center).tolist())} leaves the box "
                f"[{self.lower.tolist()}, {self.upper.tolist()}]"
            )

    def cell_center(self, index: tuple[int, ...]) -> np.ndarray:
        return np.asarray(self.origin) + self.h * np.asarray(index, dtype=float)

    def _center(self, center) -> np.ndarray:
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if c.shape != (self.n,):
            raise GeometryError(f"center {center!r} does not match grid dimension {self.n}")
        return c

    def to_json_dict(self) -> dict[str, object]:
        return {"shape": list(self.shape), "h": self.h, "origin": list(self.origin)}


class Field:
    """Scalar grid function with values in [-1, 1]."""

    def __init__(self, grid: Grid, values) -> None:
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            raise GeometryError(f"field shape {arr.shape} does not match grid shape {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("field values must be finite")
        if arr.size and np.max(np.abs(arr)) > 1.0 + _RANGE_SLACK:
            raise DomainError(f"field values outside [-1, 1]: max |u| = {np.max(np.abs(arr))!r}")
        self.grid = grid
        self.values = np.clip(arr, -1.0, 1.0)

    @classmethod
    def clamped(cls, grid: Grid, values) -> Field:
        return cls(grid, np.clip(np.asarray(values, dtype=float), -1.0, 1.0))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> Field:
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> Field:
        return Field(self.grid, self.values.copy())

    def assign(self, values) -> None:
        """Replace the values in place, projecting onto [-1, 1]."""
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.grid.shape:
            raise GeometryError(f"field shape {arr.shape} does not match grid shape {self.grid.shape}")
        self.values = np.clip(arr, -1.0, 1.0)

    def at(self, point) -> float:
        """Value at the cell whose center is nearest to point."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        index = np.rint((p - np.asarray(self.grid.origin)) / self.grid.h).astype(int)
        index = np.clip(index, 0, np.asarray(self.grid.shape) - 1)
        return float(self.values[tuple(index)])


@dataclass(frozen=True)
class Region:
    grid: Grid
    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.mask.shape != self.grid.shape or self.mask.dtype != bool:
            raise GeometryError(f"region mask {self.mask.shape}/{self.mask.dtype} does not conform to grid {self.grid.shape}")

    @classmethod
    def everywhere(cls, grid: Grid) -> Region:
        return cls(grid, np.ones(grid.shape, dtype=bool))

    @classmethod
    def empty(cls, grid: Grid) -> Region:
        return cls(grid, np.zeros(grid.shape, dtype=bool))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    def _other(self, other: Region) -> np.ndarray:
        if other.grid != self.grid:
            raise GeometryError("regions live on different grids")
        return other.mask

    def __and__(self, other: Region) -> Region:
        return Region(self.grid, self.mask & self._other(other))

    def __or__(self, other: Region) -> Region:
        return Region(self.grid, self.mask | self._other(other))

    def __sub__(self, other: Region) -> Region:
        return Region(self.grid, self.mask & ~self._other(other))

    def issubset(self, other: Region) -> bool:
        return not np.any(self.mask & ~self._other(other))


def ball_mask(grid: Grid, center, R: float, *, check: bool = True) -> Region:
    """Cells whose centers satisfy |x - center| <= R."""
    if check:
        grid.require_ball(center, R)
    return Region(grid, grid.distance(center) <= R + 1e-12)


def annulus_mask(grid: Grid, center, r_in: float, r_out: float, *, check: bool = True) -> Region:
    """Cells with r_in < |x - center| <= r_out."""
    if check:
        grid.require_ball(center, r_out)
    dist = grid.distance(center)
    return Region(grid, (dist > r_in + 1e-12) & (dist <= r_out + 1e-12))


def _check_conforms(field: Field, region: Region | None) -> np.ndarray | None:
    if region is None:
        return None
    if region.grid != field.grid:
        raise GeometryError("region does not conform to the field's grid")
    return region.mask


# -- difference operators -------------------------------------------------------------


def _forward(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    diff = np.diff(values, axis=axis)
    last = np.take(diff, [-1], axis=axis)
    return np.concatenate([diff, last], axis=axis) / h


def _forward_transpose(flux: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Apply the transpose of ``_forward`` along one axis."""
    size = flux.shape[axis]
    out = np.zeros_like(flux)
    head = [slice(None)] * flux.ndim
    tail = [slice(None)] * flux.ndim

    # rows i < N-1 contribute -f_i at i and +f_i at i+1
    head[axis] = slice(0, size - 1)
    tail[axis] = slice(1, size)
    inner = flux[tuple(head)]
    out[tuple(head)] -= inner
    out[tuple(tail)] += inner

    # closure row N-1 reuses the pair (N-2, N-1)
    last = [slice(None)] * flux.ndim
    prev = [slice(None)] * flux.ndim
    last[axis] = slice(size - 1, size)
    prev[axis] = slice(size - 2, size - 1)
    closing = flux[tuple(last)]
    out[tuple(last)] += closing
    out[tuple(prev)] -= closing
    return out / h


def gradient(field: Field) -> np.ndarray:
    """Forward-difference gradient, shape (n, *grid.shape)."""
    grid = field.grid
    return np.stack([_forward(field.values, axis, grid.h) for axis in range(grid.n)])


def gradient_magnitude(field: Field, eps_reg: float = 0.0) -> np.ndarray:
    """Regularized magnitude g = (|∇u|² + eps_reg²)^(1/2)."""
    grad = gradient(field)
    return np.sqrt(np.sum(grad * grad, axis=0) + eps_reg**2)


def energy_density(field: Field, params: EnergyParams, P: Potential) -> np.ndarray:
    g = gradient_magnitude(field, params.reg)
    return g**params.p + np.asarray(eval_potential(P, field.values))


def energy(field: Field, region: Region | None, params: EnergyParams, P: Potential) -> float:
    """J(u, region) = Σ (g^p + W(u))·hⁿ over the region's cells."""
    mask = _check_conforms(field, region)
    density = energy_density(field, params, P)
    if mask is not None:
        density = density[mask]
    return float(np.sum(density) * field.grid.cell_volume)


def density_and_derivative(
    field: Field,
    params: EnergyParams,
    P: Potential,
    region: Region | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell energy density (zero off the region) and dJ/du for every cell."""
    grid = field.grid
    mask = _check_conforms(field, region)
    grads = gradient(field)
    g = np.sqrt(np.sum(grads * grads, axis=0) + params.reg**2)
    density = g**params.p + np.asarray(eval_potential(P, field.values))
    dW = np.asarray(eval_potential_deriv(P, field.values, at_wells=True))
    weight = params.p * g ** (params.p - 2.0)
    if mask is not None:
        weight = np.where(mask, weight, 0.0)
        dW = np.where(mask, dW, 0.0)
        density = np.where(mask, density, 0.0)
    total = np.zeros(grid.shape)
    for axis in range(grid.n):
        total += _forward_transpose(weight * grads[axis], axis, grid.h)
    return density, (total + dW) * grid.cell_volume


def energy_and_gradient(
    field: Field,
    params: EnergyParams,
    P: Potential,
    region: Region | None = None,
) -> tuple[float, np.ndarray]:
    """J(u, region) and its exact derivative with respect to every cell value."""
    density, deriv = density_and_derivative(field, params, P, region)
    return float(np.sum(density) * field.grid.cell_volume), deriv


@dataclass(frozen=True)
class Residual:
    values: np.ndarray
    interior: np.ndarray

    def max_abs(self) -> float:
        inner = self.values[self.interior]
        return float(np.max(np.abs(inner))) if inner.size else 0.0


def interior_mask(grid: Grid) -> np.ndarray:
    """Cells whose stencil avoids the first layer and the last two layers of every axis."""
    mask = np.zeros(grid.shape, dtype=bool)
    mask[tuple(slice(1, size - 2) for size in grid.shape)] = True
    return mask


def p_laplacian_residual(field: Field, params: EnergyParams, P: Potential) -> Residual:
    """p·div(g^(p-2)∇u) - W'(u), flagged as interior or boundary per cell."""
    _, deriv = energy_and_gradient(field, params, P)
    return Residual(values=-deriv / field.grid.cell_volume, interior=interior_mask(field.grid))


def integrand_bound_ratios(field: Field, params: EnergyParams, P: Potential) -> tuple[float, float]:
    """Extremes of E(ξ,τ) / (|ξ|^p + |τ+1|^m χ{τ<=0}) and E(ξ,τ) / (|ξ|^p + |τ+1|^m).

    Cells where a comparison term vanishes are skipped.
    """
    grad = np.sqrt(np.sum(gradient(field) ** 2, axis=0))
    u = field.values
    e = grad**params.p + np.asarray(eval_potential(P, u))
    lower_base = grad**params.p + np.where(u <= 0.0, np.abs(u + 1.0) ** params.m, 0.0)
    upper_base = grad**params.p + np.abs(u + 1.0) ** params.m
    low = lower_base > 1e-300
    high = upper_base > 1e-300
    lower_ratio = float(np.min(e[low] / lower_base[low])) if np.any(low) else float("inf")
    upper_ratio = float(np.max(e[high] / upper_base[high])) if np.any(high) else 0.0
    return lower_ratio, upper_ratio


# -- snapshots ------------------------------------------------------------------------


def save_snapshot(field: Field, path: str | Path) -> Path:
    """Write values as little-endian float64 to ``path`` with a JSON header beside it."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": _SNAPSHOT_FORMAT, "dtype": "<f8", **field.grid.to_json_dict()}
    tmp = target.with_suffix(target.suffix + ".tmp")
    tmp.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    tmp.replace(target)
    header_path = snapshot_header_path(target)
    header_path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return target


def snapshot_header_path(path: str | Path) -> Path:
    target = Path(path)
    return target.with_name(target.name + ".json")


def load_snapshot(path: str | Path) -> Field:
    target = Path(path)
    header_path = snapshot_header_path(target)
    if not target.exists() or not header_path.exists():
        raise ConfigError(f"snapshot not found: {target} (with header {header_path})")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid snapshot header {header_path}: {exc}") from exc
    if header.get("format") != _SNAPSHOT_FORMAT:
        raise ConfigError(f"invalid snapshot header {header_path}: unknown format {header.get('format')!r}")
    grid = Grid(shape=tuple(int(s) for s in header["shape"]), h=float(header["h"]), origin=tuple(float(o) for o in header["origin"]))
    raw = np.frombuffer(target.read_bytes(), dtype="<f8")
    if raw.size != int(np.prod(grid.shape)):
        raise ConfigError(f"snapshot {target} holds {raw.size} values, header expects {int(np.prod(grid.shape))}")
    return Field(grid, raw.reshape(grid.shape).astype(float))


def export_slice_csv(field: Field, path: str | Path, *, axis_values: dict[int, int] | None = None) -> Path:
    """Write a 1-D or 2-D slice as gnuplot-style columns (x[, y], u).

    For n = 3 the third axis is fixed at ``axis_values[2]`` (default: middle).
    """
    grid = field.grid
    values = field.values
    coords = [grid.axis_coords(k) for k in range(grid.n)]
    fixed = dict(axis_values or {})
    while values.ndim > 2:
        axis = values.ndim - 1
        index = fixed.get(axis, grid.shape[axis] // 2)
        values = np.take(values, index, axis=axis)
        coords = coords[:axis]
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if values.ndim == 1:
            writer.writerow(["x", "u"])
            for x, u in zip(coords[0], values):
                writer.writerow([repr(float(x)), repr(float(u))])
        else:
            writer.writerow(["x", "y", "u"])
            for i, x in enumerate(coords[0]):
                for j, y in enumerate(coords[1]):
                    writer.writerow([repr(float(x)), repr(float(y)), repr(float(values[i, j]))])
                writer.writerow([])
    return target
