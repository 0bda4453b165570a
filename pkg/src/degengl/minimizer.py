"""Constrained minimization of the discrete energy and minimality diagnostics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DegenerateCompetitorError, GeometryError, InconclusiveError
from .grid import Field, Grid, Region, density_and_derivative, energy
from .potential import EnergyParams, Potential
from .profile1d import Profile1D, comparison_profile, heteroclinic_profile, planar_field

logger = logging.getLogger(__name__)

_SIDES = ("lo", "hi")
_ARMIJO = 1e-4
_STEP_BOUNDS = (1e-8, 1e8)


@dataclass(frozen=True)
class FaceCondition:
    axis: int
    side: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.side not in _SIDES:
            raise ConfigError(f"invalid face side {self.side!r}: expected 'lo' or 'hi'")
        if self.value is not None and not -1.0 <= self.value <= 1.0:
            raise ConfigError(f"invalid dirichlet value {self.value!r}: expected a value in [-1, 1]")


@dataclass(frozen=True)
class BoundaryCondition:
    """Per-face data; faces not listed use ``default`` (None means natural)."""

    faces: tuple[FaceCondition, ...] = ()
    default: float | None = None
    frozen: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.default is not None and not -1.0 <= self.default <= 1.0:
            raise ConfigError(f"invalid dirichlet value {self.default!r}: expected a value in [-1, 1]")

    @classmethod
    def natural(cls) -> BoundaryCondition:
        return cls()

    @classmethod
    def uniform(cls, value: float) -> BoundaryCondition:
        return cls(default=float(value))

    @classmethod
    def two_phase(cls, axis: int = 0) -> BoundaryCondition:
        """-1 on the lower face and +1 on the upper face of one axis, natural elsewhere."""
        return cls(faces=(FaceCondition(axis, "lo", -1.0), FaceCondition(axis, "hi", 1.0)))

    @classmethod
    def from_name(cls, name: str) -> BoundaryCondition:
        if name == "two-phase":
            return cls.two_phase()
        if name == "natural":
            return cls.natural()
        if name == "plus":
            return cls.uniform(1.0)
        if name == "minus":
            return cls.uniform(-1.0)
        raise ConfigError(f"unknown boundary condition {name!r}: expected two-phase, natural, plus or minus")

    def _face_values(self, grid: Grid) -> list[tuple[tuple[slice, ...], float]]:
        explicit = {(face.axis, face.side): face.value for face in self.faces}
        for axis, _side in explicit:
            if not 0 <= axis < grid.n:
                raise ConfigError(f"boundary face axis {axis} out of range for dimension {grid.n}")
        assigned: list[tuple[tuple[slice, ...], float]] = []
        for axis in range(grid.n):
            for side in _SIDES:
                value = explicit.get((axis, side), self.default)
                if value is None:
                    continue
                index = [slice(None)] * grid.n
                index[axis] = slice(0, 1) if side == "lo" else slice(grid.shape[axis] - 1, grid.shape[axis])
                assigned.append((tuple(index), float(value)))
        return assigned

    def pinned(self, grid: Grid) -> np.ndarray:
        mask = np.zeros(grid.shape, dtype=bool)
        for index, _value in self._face_values(grid):
            mask[index] = True
        if self.frozen is not None:
            if self.frozen.shape != grid.shape:
                raise GeometryError(f"frozen mask {self.frozen.shape} does not conform to grid {grid.shape}")
            mask |= self.frozen
        return mask

    def apply(self, values: np.ndarray, grid: Grid) -> np.ndarray:
        """Copy of values with Dirichlet faces set; frozen cells keep their values."""
        out = np.clip(np.array(values, dtype=float), -1.0, 1.0)
        for index, value in self._face_values(grid):
            out[index] = value
        return out


@dataclass
class SolveReport:
    iterations: int
    energy: float
    max_residual: float
    converged: bool
    energy_trace: list[float] = field(default_factory=list)
    step_trace: list[float] = field(default_factory=list)
    stalled: bool = False

    def to_json_dict(self, *, trace_stride: int = 1) -> dict[str, Any]:
        stride = max(int(trace_stride), 1)
        return {
            "iterations": self.iterations,
            "energy": self.energy,
            "max_residual": self.max_residual,
            "converged": self.converged,
            "stalled": self.stalled,
            "trace_stride": stride,
            "energy_trace": self.energy_trace[::stride],
            "step_trace": self.step_trace[::stride],
        }


def _projected_residual(values: np.ndarray, deriv: np.ndarray, free: np.ndarray, volume: float) -> float:
    r = deriv / volume
    r = np.where((values >= 1.0) & (r < 0.0), 0.0, r)
    r = np.where((values <= -1.0) & (r > 0.0), 0.0, r)
    r = np.where(free, r, 0.0)
    return float(np.max(np.abs(r))) if r.size else 0.0


def minimize(
    u0: Field,
    bc: BoundaryCondition,
    params: EnergyParams,
    P: Potential,
    tol: float = 1e-6,
    max_iter: int = 200_000,
    *,
    log_every: int = 5000,
) -> tuple[Field, SolveReport]:
    """Projected Barzilai-Borwein descent with Armijo backtracking on u ∈ [-1, 1].

    Steps act on the Jacobi-scaled gradient h²/(4pn) · dJ/du / hⁿ. Each accepted
    step lowers J; the energy change is summed cell by cell so that the trace
    stays monotone below the rounding level of J itself.
    """
    grid = u0.grid
    pinned = bc.pinned(grid)
    free = ~pinned
    volume = grid.cell_volume
    scale = grid.h**2 / (4.0 * params.p * grid.n * volume)

    x = bc.apply(u0.values, grid)
    density, deriv = density_and_derivative(Field(grid, x), params, P)
    deriv[pinned] = 0.0
    current = float(np.sum(density) * volume)
    energies = [current]
    steps: list[float] = []
    alpha = 1.0
    converged = False
    stalled = False
    residual = _projected_residual(x, deriv, free, volume)
    iteration = 0

    while iteration < max_iter:
        if residual <= tol:
            converged = True
            break
        iteration += 1
        while True:
            trial = np.clip(x - alpha * scale * deriv, -1.0, 1.0)
            trial[pinned] = x[pinned]
            moved = float(np.sum(deriv * (x - trial)))
            if moved <= 0.0:
                stalled = True
                break
            trial_density, trial_deriv = density_and_derivative(Field(grid, trial), params, P)
            change = float(np.sum(trial_density - density) * volume)
            if change <= -_ARMIJO * moved:
                break
            alpha *= 0.5
            if alpha < _STEP_BOUNDS[0]:
                stalled = True
                break
        if stalled:
            iteration -= 1
            break

        trial_deriv[pinned] = 0.0
        s = trial - x
        y = trial_deriv - deriv
        sy = float(np.sum(s * y))
        steps.append(alpha)
        x, density, deriv = trial, trial_density, trial_deriv
        current += change
        energies.append(current)
        residual = _projected_residual(x, deriv, free, volume)
        if sy > 0.0:
            alpha = float(np.sum(s * s)) / (scale * sy)
        else:
            alpha = _STEP_BOUNDS[1]
        alpha = min(max(alpha, _STEP_BOUNDS[0]), _STEP_BOUNDS[1])
        if log_every and iteration % log_every == 0:
            logger.debug("iteration %d energy %.12g residual %.3e step %.3e", iteration, current, residual, alpha)

    if not converged and residual <= tol:
        converged = True
    final = Field(grid, x)
    report = SolveReport(
        iterations=iteration,
        energy=energy(final, None, params, P),
        max_residual=residual,
        converged=converged,
        energy_trace=energies,
        step_trace=steps,
        stalled=stalled,
    )
    if converged:
        logger.info("minimize converged in %d iterations, residual %.3e", iteration, residual)
    else:
        logger.warning(
            "minimize stopped after %d iterations with residual %.3e > tol %.3e%s",
            iteration,
            residual,
            tol,
            " (line search stalled)" if stalled else "",
        )
    return final, report


def initial_field(
    grid: Grid,
    kind: str,
    params: EnergyParams,
    P: Potential,
    rng: np.random.Generator | None = None,
) -> Field:
    """Starting field: "random", "plus", "minus" or "planar" (heteroclinic along axis 0)."""
    if kind == "random":
        generator = rng if rng is not None else np.random.default_rng(0)
        return Field(grid, generator.uniform(-1.0, 1.0, size=grid.shape))
    if kind == "plus":
        return Field.constant(grid, 1.0)
    if kind == "minus":
        return Field.constant(grid, -1.0)
    if kind == "planar":
        return planar_field(heteroclinic_profile(params.p, P, grid.axis_coords(0)), grid)
    raise ConfigError(f"unknown initial field {kind!r}: expected random, plus, minus or planar")


def measured_zero(field: Field, near=None) -> np.ndarray:
    """Interface anchor: the cell of least |u| closest to ``near``, refined by one Newton step."""
    grid = field.grid
    target = np.zeros(grid.n) if near is None else np.atleast_1d(np.asarray(near, dtype=float))
    magnitude = np.abs(field.values)
    best = magnitude <= magnitude.min() + 1e-15
    dist = grid.distance(target)
    candidates = np.argwhere(best & (dist <= dist[best].min() + 1e-12))
    index = tuple(int(i) for i in candidates[0])
    point = grid.cell_center(index)
    if grid.n == 1:
        slopes = [np.gradient(field.values, grid.h)]
    else:
        slopes = np.gradient(field.values, grid.h)
    g = np.array([float(s[index]) for s in slopes])
    norm2 = float(g @ g)
    if norm2 > 0:
        shift = -field.values[index] * g / norm2
        length = float(np.linalg.norm(shift))
        if length > grid.h:
            shift *= grid.h / length
        point = point + shift
    return point


# -- near-plus-one search -------------------------------------------------------------


@dataclass(frozen=True)
class NearPlusOneReport:
    index: tuple[int, ...]
    location: tuple[float, ...]
    anchor: tuple[float, ...]
    distance: float
    radius: float
    h_level: float

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "index": list(self.index),
            "location": list(self.location),
            "anchor": list(self.anchor),
            "distance": self.distance,
            "radius": self.radius,
            "h_level": self.h_level,
        }


def find_near_plus_one(u: Field, h_level: float, anchor=None) -> NearPlusOneReport:
    """Nearest cell to the anchor with u >= 1 - h_level, and the radius of u >= 0 around it."""
    if not 0 < h_level < 1:
        raise ConfigError(f"invalid h_level={h_level!r}: expected 0 < h_level < 1")
    grid = u.grid
    x0 = measured_zero(u) if anchor is None else np.atleast_1d(np.asarray(anchor, dtype=float))
    candidates = u.values >= 1.0 - h_level
    if not np.any(candidates):
        raise InconclusiveError(f"inconclusive: no cell with u >= {1.0 - h_level!r} inside the box")
    dist = grid.distance(x0)
    nearest = dist[candidates].min()
    index = tuple(int(i) for i in np.argwhere(candidates & (dist <= nearest + 1e-12))[0])
    x_h = grid.cell_center(index)
    negative = u.values < 0.0
    from_x_h = grid.distance(x_h)
    to_negative = float(from_x_h[negative].min()) if np.any(negative) else math.inf
    to_wall = float(min(np.min(x_h - grid.lower), np.min(grid.upper - x_h)))
    return NearPlusOneReport(
        index=index,
        location=tuple(float(c) for c in x_h),
        anchor=tuple(float(c) for c in x0),
        distance=float(np.linalg.norm(x_h - x0)),
        radius=min(to_negative, to_wall),
        h_level=float(h_level),
    )


# -- sliding super-solution -----------------------------------------------------------


@dataclass(frozen=True)
class SlidingReport:
    contact: bool
    step: int | None
    center: tuple[float, ...] | None
    steps_taken: int
    margins: tuple[float, ...]
    v_center: float
    violation: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "contact": self.contact,
            "step": self.step,
            "center": None if self.center is None else list(self.center),
            "steps_taken": self.steps_taken,
            "margins": list(self.margins),
            "v_center": self.v_center,
            "violation": self.violation,
        }


def sliding_supersolution_test(
    u: Field,
    prof: Profile1D,
    x0,
    x1,
    r: float,
    *,
    step: float | None = None,
) -> SlidingReport:
    """Slide v(x - c) = U(|x - c| - r) from x0 to x1 and stop at the first contact u >= v."""
    if prof.kind != "supersolution":
        raise ConfigError(f"sliding needs a supersolution profile, got {prof.kind!r}")
    grid = u.grid
    meta = prof.meta
    if r + meta.a < 0:
        raise ConfigError(f"radius r={r!r} too small: need r >= -a = {-meta.a!r}")
    support = r + meta.b
    start = np.atleast_1d(np.asarray(x0, dtype=float))
    stop = np.atleast_1d(np.asarray(x1, dtype=float))
    length = float(np.linalg.norm(stop - start))
    spacing = grid.h if step is None else min(float(step), grid.h)
    count = max(int(math.ceil(length / spacing)), 1)
    centers = [start + (stop - start) * k / count for k in range(count + 1)]
    for center in centers:
        grid.require_ball(center, support)

    margins: list[float] = []
    for k, center in enumerate(centers):
        dist = grid.distance(center)
        ball = dist <= support
        v, _ = prof.evaluate(dist[ball] - r)
        margin = float(np.max(u.values[ball] - v))
        margins.append(margin)
        if margin >= 0.0:
            logger.info("sliding contact at step %d of %d, center %s", k, count, center.tolist())
            return SlidingReport(
                contact=True,
                step=k,
                center=tuple(float(c) for c in center),
                steps_taken=k + 1,
                margins=tuple(margins),
                v_center=meta.s0,
                violation=False,
            )
    violation = u.at(stop) > meta.s0
    if violation:
        logger.warning("sliding reached the end without contact although u(x1) > v(0)")
    return SlidingReport(
        contact=False,
        step=None,
        center=None,
        steps_taken=len(centers),
        margins=tuple(margins),
        v_center=meta.s0,
        violation=bool(violation),
    )


# -- Q-minimality audit ---------------------------------------------------------------


@dataclass(frozen=True)
class QAuditReport:
    worst_ratio: float
    trials: int
    family_worst: dict[str, float]
    energy_u: float

    def certifies(self, Q: float = 1.0, slack: float = 0.0) -> bool:
        return self.worst_ratio <= Q + slack

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "worst_ratio": self.worst_ratio,
            "trials": self.trials,
            "family_worst": dict(sorted(self.family_worst.items())),
            "energy_u": self.energy_u,
        }


def _inradius(region: Region, center: np.ndarray) -> float:
    outside = ~region.mask
    if not np.any(outside):
        return math.inf
    return float(region.grid.distance(center)[outside].min())


def q_minimality_audit(
    u: Field,
    region: Region,
    params: EnergyParams,
    P: Potential,
    trials: int,
    *,
    seed: int = 0,
) -> QAuditReport:
    """Worst J(u, Ω')/J(v, Ω') over sampled competitors v that agree with u off the region.

    Ω' is the region grown by one cell, which holds every cell whose energy
    sees a changed value. Families cycle through the ramp competitor, the
    comparison-profile competitor (both as min(u, v)) and clamped bumps.
    """
    grid = u.grid
    if region.grid != grid:
        raise GeometryError("region does not conform to the field's grid")
    if region.count == 0:
        raise GeometryError("q-minimality audit needs a non-empty region")
    border = np.ones(grid.shape, dtype=bool)
    border[tuple(slice(1, size - 2) for size in grid.shape)] = False
    if np.any(region.mask & border):
        raise GeometryError("region must lie strictly inside the domain")
    completed = Region(grid, ndimage.binary_dilation(region.mask, iterations=1))
    energy_u = energy(u, completed, params, P)

    rng = np.random.default_rng(seed)
    cells = np.argwhere(region.mask)
    centroid = grid.cell_center(tuple(cells.mean(axis=0)))
    depth = _inradius(region, centroid)
    families = ("ramp", "comparison", "bump")
    worst: dict[str, float] = {}
    ratio_max = 0.0

    for trial in range(trials):
        family = families[trial % len(families)]
        if family == "comparison" and not params.degenerate:
            family = "ramp"
        if family in ("ramp", "comparison") and not depth > grid.h:
            family = "bump"
        if family == "ramp":
            radius = rng.uniform(0.0, max(depth - 2.0, 0.0))
            dist = grid.distance(centroid)
            candidate = np.minimum(u.values, np.clip(dist - radius - 1.0, -1.0, 1.0))
        elif family == "comparison":
            radius = rng.uniform(0.0, max(depth - 1.0, 0.0))
            dist = grid.distance(centroid)
            v_r, _ = comparison_profile(params.p, params.m, dist - radius)
            candidate = np.minimum(u.values, v_r)
        else:
            center = grid.cell_center(tuple(cells[rng.integers(len(cells))]))
            width = rng.uniform(2.0 * grid.h, max(3.0 * grid.h, min(depth, 10.0)))
            amplitude = rng.uniform(0.05, 0.5) * rng.choice((-1.0, 1.0))
            dist = grid.distance(center)
            bump = amplitude * np.clip(1.0 - (dist / width) ** 2, 0.0, None) ** 2
            candidate = u.values + bump
        v = Field.clamped(grid, np.where(region.mask, candidate, u.values))
        energy_v = energy(v, completed, params, P)
        if energy_v == 0.0 and energy_u > 0.0:
            raise DegenerateCompetitorError(
                f"competitor {family!r} has zero energy on the region while J(u) = {energy_u!r}"
            )
        ratio = 0.0 if energy_u == 0.0 else energy_u / energy_v
        worst[family] = max(worst.get(family, 0.0), ratio)
        ratio_max = max(ratio_max, ratio)

    return QAuditReport(worst_ratio=ratio_max, trials=trials, family_worst=worst, energy_u=energy_u)
