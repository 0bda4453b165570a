"""Experiment pipelines for ``degengl run`` and ``degengl sweep``."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import Future, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator

import numpy as np
import scipy
from scipy import optimize

from . import __version__
from .audit import (
    density_constants,
    density_report,
    discrete_inequality_check,
    induction_simulator,
    initial_ball_density,
    largest_closing_sigma,
    main_inequality_report,
    minimal_closing_c1,
    power_seed,
    ramp_competitor_energy,
    rho1,
    sandwich_check,
    volume_potential_sequences,
)
from .config import RunConfig
from .errors import ConfigError, ConvergenceError, LabError
from .grid import (
    Field,
    Grid,
    ball_mask,
    energy_density,
    export_slice_csv,
    integrand_bound_ratios,
    p_laplacian_residual,
    save_snapshot,
    snapshot_header_path,
)
from .minimizer import (
    BoundaryCondition,
    find_near_plus_one,
    initial_field,
    measured_zero,
    minimize,
    q_minimality_audit,
    sliding_supersolution_test,
)
from .potential import (
    EnergyParams,
    Potential,
    check_admissible,
    load_potential_table,
    model_potential,
    prior_density_criterion,
)
from .profile1d import (
    build_comparison_profile,
    first_integral_defect,
    fit_decay_exponent,
    heteroclinic_profile,
    level_weight_integral,
    ode_residual,
    planar_field,
    radial_field,
    supersolution_profile,
    supersolution_radius,
    tail_energy,
)
from .registry import SWEEP_AXES, axis_applies, is_known_axis

logger = logging.getLogger(__name__)

OUT_ENV = "DEGENGL_OUT"


@dataclass(frozen=True)
class RunnerConfig:
    out_root: str | None = None
    workdir: str | None = None
    threads: int = 1


@dataclass
class StageResult:
    stage: str
    status: str
    elapsed_ms: int
    summary: dict[str, Any] | None = None
    error: str | None = None

    def to_transcript_record(self) -> dict[str, Any]:
        return {
            "ts": int(time.time() * 1000),
            "stage": self.stage,
            "status": self.status,
            "elapsed_ms": self.elapsed_ms,
            "summary": self.summary,
            "error": self.error,
        }


@dataclass
class RunOutcome:
    experiment: str
    run_dir: Path
    report: dict[str, Any]
    summary: dict[str, Any]
    artifacts: list[str] = field(default_factory=list)


def _elapsed_ms(started: float) -> int:
    return int((time.perf_counter() - started) * 1000)


def _clean(value: Any) -> Any:
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats mapped to null."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def dump_json(payload: Any) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    tmp_path.write_text(text, encoding="utf-8")
    tmp_path.replace(path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def default_out_root() -> Path:
    return Path(os.environ.get(OUT_ENV) or Path.cwd() / "runs")


def _default_run_dir(config: RunConfig, out_root: str | None) -> Path:
    root = Path(out_root) if out_root else default_out_root()
    return root / f"{config.name}-{config.config_hash[:12]}"


class RunContext:
    """Owns one run directory: artifacts, transcript and manifest."""

    def __init__(self, config: RunConfig, run_dir: Path) -> None:
        self.config = config
        self.run_dir = run_dir
        self.artifacts: list[str] = []
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._transcript = self.run_dir / "transcript.jsonl"
        self._transcript.write_text("", encoding="utf-8")

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def _register(self, name: str) -> None:
        if name not in self.artifacts:
            self.artifacts.append(name)

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.path(name)
        write_atomic(target, dump_json(payload))
        self._register(name)
        return target

    def write_csv(self, name: str, header: list[str], rows: list[tuple[Any, ...]] | list[list[Any]]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        target = self.path(name)
        write_atomic(target, buffer.getvalue())
        self._register(name)
        return target

    def write_snapshot(self, name: str, u: Field) -> Path:
        target = save_snapshot(u, self.path(name))
        self._register(name)
        self._register(snapshot_header_path(target).name)
        return target

    def write_slice(self, name: str, u: Field) -> Path:
        target = export_slice_csv(u, self.path(name))
        self._register(name)
        return target

    @contextmanager
    def stage(self, name: str) -> Iterator[dict[str, Any]]:
        started = time.perf_counter()
        summary: dict[str, Any] = {}
        logger.info("stage %s: start", name)
        try:
            yield summary
        except Exception as exc:
            self._append(StageResult(name, "error", _elapsed_ms(started), _clean(summary) or None, str(exc)))
            raise
        self._append(StageResult(name, "ok", _elapsed_ms(started), _clean(summary) or None))
        logger.info("stage %s: done in %d ms", name, _elapsed_ms(started))

    def _append(self, result: StageResult) -> None:
        with self._transcript.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(result.to_transcript_record(), sort_keys=True, separators=(",", ":")) + "\n")

    def write_manifest(self) -> Path:
        payload = {
            "config": self.config.to_payload(),
            "config_hash": self.config.config_hash,
            "versions": {"degengl": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
            "artifacts": {name: _sha256(self.path(name)) for name in sorted(self.artifacts)},
        }
        target = self.path("manifest.json")
        write_atomic(target, dump_json(payload))
        return target


# -- building blocks ------------------------------------------------------------------


def params_from(config: RunConfig) -> EnergyParams:
    section = config.section("params")
    return EnergyParams(**section)


def potential_from(config: RunConfig, params: EnergyParams) -> Potential:
    section = config.section("potential")
    if section["kind"] == "model":
        return model_potential(params.m)
    if section["kind"] == "table":
        if not section["table"]:
            raise ConfigError("potential.kind=table needs potential.table (CSV with tau,W,dW)")
        return load_potential_table(section["table"], params.m)
    raise ConfigError(f"unknown potential kind {section['kind']!r}: expected model or table")


def grid_from(config: RunConfig, params: EnergyParams) -> Grid:
    section = config.section("grid")
    box = section["box"]
    side: float | tuple[float, ...] = tuple(box) if isinstance(box, list) else float(box)
    return Grid.box(params.n, side, section["h"])


def _solve(ctx: RunContext, config: RunConfig, params: EnergyParams, P: Potential, grid: Grid) -> Field:
    solver = config.section("solver")
    rng = np.random.default_rng(config.seed)
    bc = BoundaryCondition.from_name(config.section("bc")["kind"])
    with ctx.stage("minimize") as summary:
        u0 = Field(grid, bc.apply(initial_field(grid, config.section("init")["kind"], params, P, rng).values, grid))
        u, report = minimize(u0, bc, params, P, solver["tol"], solver["max_iter"], log_every=solver["log_every"])
        summary.update(iterations=report.iterations, converged=report.converged, energy=report.energy)
    stride = max(len(report.energy_trace) // 2000, 1)
    ctx.write_json("solve.json", report.to_json_dict(trace_stride=stride))
    ctx.write_csv(
        "trace.csv",
        ["iteration", "energy"],
        [(k, e) for k, e in enumerate(report.energy_trace)][::stride],
    )
    ctx.write_snapshot("field.f64", u)
    if not report.converged and solver["require_converged"]:
        raise ConvergenceError(
            f"minimize did not converge: residual {report.max_residual:.3e} > tol {solver['tol']:.3e} "
            f"after {report.iterations} iterations"
        )
    return u


def _loglog_slope(x: list[float], y: list[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)
    return float(slope)


# -- pipelines ------------------------------------------------------------------------


def run_profile_tails(ctx: RunContext, config: RunConfig) -> dict[str, Any]:
    """Comparison-profile decay and tail-energy exponents."""
    params = params_from(config)
    params.require_degenerate()
    P = potential_from(config, params)
    section = config.section("profile")
    report: dict[str, Any] = {"params": params.to_json_dict(), "regime": params.regime}

    with ctx.stage("admissibility") as summary:
        admissible = check_admissible(P, params, 2001)
        report["admissibility"] = admissible.to_json_dict()
        summary["passed"] = admissible.passed

    with ctx.stage("comparison-profile") as summary:
        t_grid = np.linspace(section["t_min"], section["t_max"], section["samples"])
        prof = build_comparison_profile(params.p, params.m, t_grid)
        window = (section["window"][0], section["window"][1])
        decay = fit_decay_exponent(prof, window)
        report["decay"] = {"fitted": decay, "expected": params.decay_exponent, "window": list(window)}
        summary["decay"] = decay
    ctx.write_csv("profile.csv", ["t", "u", "du"], prof.rows())

    with ctx.stage("tail-energy") as summary:
        Ts = [float(T) for T in section["tail_T"]]
        energies = [tail_energy(params.p, params.m, T, P) for T in Ts]
        slope = _loglog_slope(Ts, energies)
        weights = [level_weight_integral(T, params.p, params.m, P) for T in Ts]
        report["tail"] = {"T": Ts, "energy": energies, "slope": slope, "gamma": params.gamma, "level_weight": weights}
        summary["slope"] = slope
    ctx.write_csv(
        "tails.csv",
        ["T", "E", "T_gamma_E"],
        [(T, E, T**params.gamma * E) for T, E in zip(Ts, energies)],
    )
    ctx.write_json("report.json", report)
    return {
        "gamma": params.gamma,
        "tail_slope": slope,
        "decay_exponent": decay,
        "expected_decay": params.decay_exponent,
    }


def run_tanh_1d(ctx: RunContext, config: RunConfig) -> dict[str, Any]:
    """Classical p = m = 2 check against tanh, for the quadrature and for the solver."""
    params = params_from(config)
    if params.n != 1:
        raise ConfigError(f"tanh-1d runs in dimension 1, got params.n={params.n}")
    P = potential_from(config, params)
    report: dict[str, Any] = {"params": params.to_json_dict()}

    with ctx.stage("heteroclinic") as summary:
        t = np.linspace(-5.0, 5.0, 1001)
        prof = heteroclinic_profile(params.p, P, t)
        quad_error = float(np.max(np.abs(prof.u - np.tanh(t))))
        report["heteroclinic_error"] = quad_error
        summary["error"] = quad_error

    grid = grid_from(config, params)
    u = _solve(ctx, config, params, P, grid)
    x = grid.axis_coords(0)

    with ctx.stage("tanh-fit") as summary:
        anchor = float(measured_zero(u)[0])

        def sup_error(shift: float) -> float:
            return float(np.max(np.abs(u.values - np.tanh(x - shift))))

        best = optimize.minimize_scalar(sup_error, bounds=(anchor - grid.h, anchor + grid.h), method="bounded")
        shift = float(best.x)
        error = sup_error(shift)
        residual = p_laplacian_residual(u, params, P)
        report["fit"] = {"anchor": anchor, "shift": shift, "sup_error": error, "residual": residual.max_abs()}
        summary["sup_error"] = error

    with ctx.stage("near-plus-one") as summary:
        levels = config.section("audit")["h_levels"]
        report["near_plus_one"] = [find_near_plus_one(u, h, anchor=[anchor]).to_json_dict() for h in levels]
        summary["levels"] = len(levels)

    with ctx.stage("q-minimality") as summary:
        region = ball_mask(grid, [anchor], 5.0)
        audit = q_minimality_audit(u, region, params, P, config.section("audit")["trials"], seed=config.seed)
        report["q_minimality"] = audit.to_json_dict()
        summary["worst_ratio"] = audit.worst_ratio

    ctx.write_csv("field.csv", ["x", "u", "tanh"], [(a, b, math.tanh(a - shift)) for a, b in zip(x, u.values)])
    ctx.write_json("report.json", report)
    return {"sup_error": error, "heteroclinic_error": quad_error, "h": grid.h}


def _ball_energy_scaling(u: Field, center, radii: np.ndarray, params: EnergyParams, P: Potential) -> list[float]:
    grid = u.grid
    shell = np.ceil(grid.distance(center) - 1e-12).astype(int).ravel()
    top = int(radii.max())
    inside = shell <= top
    density = energy_density(u, params, P).ravel()[inside]
    cumulative = np.cumsum(np.bincount(shell[inside], weights=density, minlength=top + 1)) * grid.cell_volume
    return [float(cumulative[R]) for R in radii]


def run_density(ctx: RunContext, config: RunConfig) -> dict[str, Any]:
    """Solve for a two-phase minimizer and audit densities and the inequalities around its zero."""
    params = params_from(config)
    params.require_degenerate()
    P = potential_from(config, params)
    grid = grid_from(config, params)
    section = config.section("audit")
    n = grid.n
    report: dict[str, Any] = {
        "params": params.to_json_dict(),
        "grid": grid.to_json_dict(),
        "prior_criterion": prior_density_criterion(n, params.p, params.m),
    }

    u = _solve(ctx, config, params, P, grid)
    if n >= 2:
        ctx.write_slice("slice.csv", u)

    with ctx.stage("anchor") as summary:
        center = measured_zero(u)
        report["center"] = center.tolist()
        report["integrand_bounds"] = list(integrand_bound_ratios(u, params, P))
        summary["center"] = center.tolist()

    with ctx.stage("density") as summary:
        density = density_report(u, center, section["R0"], section["R_max"], params)
        report["density"] = density.to_json_dict()
        report["initial_ball_density"] = initial_ball_density(u, center, float(section["R0"]))
        summary.update(delta=density.delta, flags=density.flags)
    ctx.write_csv("density.csv", ["R", "plus", "minus"], density.rows())

    with ctx.stage("sequences") as summary:
        seq = volume_potential_sequences(u, center, section["R_max"], params, P).with_mixture(section["T"], params.p, params.m)
        radii = np.arange(max(section["R0"], 2), section["R_max"] + 1)
        ball_energy = _ball_energy_scaling(u, center, radii, params, P)
        scale = radii.astype(float) ** (n - 1)
        report["energy_scaling"] = {
            "radii": radii.tolist(),
            "P_over_R": (seq.P[radii] / scale).tolist(),
            "J_over_R": (np.asarray(ball_energy) / scale).tolist(),
        }
        summary["R_max"] = seq.R_max
    ctx.write_csv("sequences.csv", ["R", "V", "P", "M"], seq.rows())
    ctx.write_csv(
        "energy_scaling.csv",
        ["R", "P_over_R", "J_over_R"],
        list(zip(radii.tolist(), report["energy_scaling"]["P_over_R"], report["energy_scaling"]["J_over_R"])),
    )

    with ctx.stage("discrete-inequality") as summary:
        discrete = discrete_inequality_check(seq, n)
        sandwich = sandwich_check(seq, n, discrete.C0)
        report["discrete"] = discrete.to_json_dict()
        report["sandwich"] = sandwich.to_json_dict()
        if density.delta > 0:
            report["constants"] = density_constants(n, density.delta, section["T"], discrete.C0).to_json_dict()
        summary.update(c1=discrete.c1, C0=discrete.C0, passed=discrete.passed)
    ctx.write_csv(
        "discrete.csv",
        ["R", "bracket", "lhs", "rhs", "slack"],
        [(r.R, r.bracket, r.lhs, r.rhs, r.slack) for r in discrete.rows],
    )

    with ctx.stage("main-inequality") as summary:
        records = []
        for R in section["radii"]:
            if R + 1 > section["R_max"] or not grid.ball_fits(center, R + 1):
                logger.warning("skipping main inequality at R=%d: B_{R+1} leaves the audited ball", R)
                continue
            records.append(main_inequality_report(u, center, R, section["T"], params, P))
        ratios = [rec.ratio for rec in records if rec.ratio is not None]
        report["main"] = [rec.to_json_dict() for rec in records]
        report["main_fit"] = {
            "min_ratio": min(ratios) if ratios else None,
            "median_ratio": float(np.median(ratios)) if ratios else None,
        }
        summary["records"] = len(records)
    ctx.write_csv(
        "main.csv",
        ["R", "lhs", "rhs", "ratio", "coarea_lhs", "coarea_rhs"],
        [(r.R, r.lhs, r.rhs, r.ratio, r.coarea_lhs, r.coarea_rhs) for r in records],
    )

    with ctx.stage("diagnostics") as summary:
        report["near_plus_one"] = []
        for level in section["h_levels"]:
            found = find_near_plus_one(u, level, anchor=center)
            report["near_plus_one"].append(found.to_json_dict())
        report["ramp"] = ramp_competitor_energy(u, center, float(section["R0"]), params, P).to_json_dict()
        region = ball_mask(grid, center, min(4.0, 0.5 * section["R0"]))
        audit = q_minimality_audit(u, region, params, P, section["trials"], seed=config.seed)
        report["q_minimality"] = audit.to_json_dict()
        summary["worst_ratio"] = audit.worst_ratio

    ctx.write_json("report.json", report)
    return {
        "delta": density.delta,
        "c1": discrete.c1,
        "C0": discrete.C0,
        "gamma": params.gamma,
        "main_min_ratio": report["main_fit"]["min_ratio"],
    }


def run_induction(ctx: RunContext, config: RunConfig) -> dict[str, Any]:
    """Worst-case propagation of the discrete inequality from a power-law seed."""
    params = params_from(config)
    section = config.section("induction")
    n = params.n
    T = section["T"]
    gamma = section["gamma"] if section["gamma"] is not None else params.gamma
    sigma, C0 = section["sigma"], section["C0"]
    closing = minimal_closing_c1(n, sigma, T, gamma, C0)
    c1 = section["c1"] if section["c1"] is not None else 1.1 * closing
    R_start = section["R_start"] if section["R_start"] is not None else int(math.ceil(rho1(n, sigma, T, C0)))
    R_stop = section["R_stop"] if section["R_stop"] is not None else 4 * R_start
    report: dict[str, Any] = {"minimal_closing_c1": closing}

    with ctx.stage("simulate") as summary:
        trace = induction_simulator(n, sigma, T, C0, c1, gamma, power_seed(sigma, n, R_start, T), R_start, R_stop)
        report["trace"] = trace.to_json_dict()
        summary.update(maintained=trace.maintained, below_rho1=trace.below_rho1, first_violation=trace.first_violation)
    ctx.write_csv(
        "induction.csv",
        ["R", "M_next", "increment", "above_rho1", "chain_ok", "ind_ok", "step_ok"],
        trace.rows(),
    )
    if section["search_sigma"]:
        with ctx.stage("sigma-search") as summary:
            found = largest_closing_sigma(n, T, C0, c1, gamma)
            report["sigma_search"] = found.to_json_dict()
            summary["sigma"] = found.sigma
    ctx.write_json("report.json", report)
    return {"rho1": trace.rho1, "maintained": trace.maintained, "c1": c1, "gamma": gamma}


def run_supersolution(ctx: RunContext, config: RunConfig) -> dict[str, Any]:
    """Super-solution profile, its radial certificate and a sliding check against a heteroclinic field."""
    params = params_from(config)
    P = potential_from(config, params)
    section = config.section("profile")
    h_grid = config.section("grid")["h"]
    report: dict[str, Any] = {"params": params.to_json_dict()}

    with ctx.stage("profile") as summary:
        prof = supersolution_profile(section["level"], params.p, P, section["epsilon"])
        defect = float(np.max(first_integral_defect(prof, P)))
        ode = float(np.max(np.abs(ode_residual(prof, P))))
        report["profile"] = {"meta": prof.meta.to_json_dict(), "first_integral_defect": defect, "ode_residual": ode}
        summary["defect"] = defect
    ctx.write_csv("supersolution.csv", ["t", "u", "du"], prof.rows())

    meta = prof.meta
    with ctx.stage("certificate") as summary:
        r_min = supersolution_radius(prof, params.n)
        r = section["radius_factor"] * r_min
        width = meta.b - meta.a + 4.0 * h_grid
        lo = r + meta.a - 2.0 * h_grid
        shape = [int(math.ceil(width / h_grid)) + 4] + [int(math.ceil(4.0 / h_grid)) + 1] * (params.n - 1)
        origin = [lo] + [-2.0] * (params.n - 1)
        strip = Grid(shape=tuple(shape), h=h_grid, origin=tuple(origin))
        center = np.zeros(params.n)
        v = radial_field(prof, strip, center, r)
        residual = p_laplacian_residual(v, params, P)
        dist = strip.distance(center)
        margin = 2.0 * h_grid
        annulus = residual.interior & (dist > r + meta.a + margin) & (dist < r + meta.b - margin)
        worst = float(np.max(residual.values[annulus])) if np.any(annulus) else math.nan
        report["certificate"] = {"r_heuristic": r_min, "r": r, "cells": int(np.count_nonzero(annulus)), "max_residual": worst}
        summary.update(r=r, max_residual=worst)

    with ctx.stage("sliding") as summary:
        r_slide = max(-meta.a, 0.0)
        support = r_slide + meta.b
        line = Grid.box(1, 2.0 * support + 20.0, h_grid)
        u = planar_field(heteroclinic_profile(params.p, P, line.axis_coords(0)), line)
        x0 = [float(line.lower[0]) + support + h_grid]
        sliding = sliding_supersolution_test(u, prof, x0, [0.0], r_slide)
        report["sliding"] = sliding.to_json_dict()
        summary["contact"] = sliding.contact

    ctx.write_json("report.json", report)
    return {
        "epsilon": meta.epsilon,
        "eta": meta.eta,
        "r_heuristic": r_min,
        "certified": bool(worst < 0.0),
        "defect": defect,
    }


PIPELINES: dict[str, Callable[[RunContext, RunConfig], dict[str, Any]]] = {
    "profile-tails": run_profile_tails,
    "tanh-1d": run_tanh_1d,
    "density-2d": run_density,
    "density-3d": run_density,
    "induction": run_induction,
    "supersolution": run_supersolution,
}


def run_experiment(config: RunConfig, *, runner: RunnerConfig | None = None) -> RunOutcome:
    """Execute the config's pipeline and write report, CSVs and manifest into its run directory."""
    cfg = runner or RunnerConfig()
    run_dir = Path(cfg.workdir) if cfg.workdir else _default_run_dir(config, cfg.out_root)
    ctx = RunContext(config, run_dir)
    logger.info("run %s (%s) into %s", config.name, config.experiment, run_dir)
    pipeline = PIPELINES[config.experiment]
    try:
        summary = pipeline(ctx, config)
    finally:
        ctx.write_manifest()
    report = json.loads(ctx.path("report.json").read_text(encoding="utf-8"))
    return RunOutcome(config.experiment, run_dir, report, _clean(summary), list(ctx.artifacts))


# -- sweeps ---------------------------------------------------------------------------


def _format_value(value: Any) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _sweep_one(config: RunConfig, override: dict[str, Any], run_dir: str) -> dict[str, Any]:
    try:
        outcome = run_experiment(config.with_overrides(override), runner=RunnerConfig(workdir=run_dir))
    except LabError as exc:
        return {"status": "error", "error": f"{exc.kind}: {exc}"}
    except Exception as exc:
        logger.exception("sweep run in %s failed", run_dir)
        return _crash_row(exc)
    return {"status": "ok", **outcome.summary}


def _crash_row(exc: BaseException) -> dict[str, Any]:
    return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}


def _collect(future: Future) -> dict[str, Any]:
    try:
        return future.result()
    except Exception as exc:
        logger.error("sweep worker died: %s", exc)
        return _crash_row(exc)


def sweep(
    config: RunConfig,
    axis: str,
    values: list[Any],
    *,
    runner: RunnerConfig | None = None,
) -> tuple[Path, list[dict[str, Any]]]:
    """Run the pipeline once per value of one axis and aggregate the key scalars into sweep.csv."""
    cfg = runner or RunnerConfig()
    if not is_known_axis(axis):
        raise ConfigError(f"unknown sweep axis {axis!r}: expected one of {', '.join(sorted(SWEEP_AXES))}")
    if not axis_applies(axis, config.experiment):
        raise ConfigError(f"sweep axis {axis!r} does not apply to experiment {config.experiment!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    section, key = SWEEP_AXES[axis]
    root = Path(cfg.workdir) if cfg.workdir else _default_run_dir(config, cfg.out_root)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [
        (config, {f"{section}.{key}": value}, str(root / f"{axis}={_format_value(value)}"))
        for value in values
    ]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_sweep_one, *job) for job in jobs]
            results = [_collect(future) for future in futures]
    else:
        results = [_sweep_one(*job) for job in jobs]

    rows = [{"axis": axis, "value": value, **result} for value, result in zip(values, results)]
    columns = ["axis", "value", "status"] + sorted({k for row in rows for k in row} - {"axis", "value", "status"})
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else row.get(c) for c in columns])
    target = root / "sweep.csv"
    write_atomic(target, buffer.getvalue())
    failures = sum(1 for row in rows if row["status"] == "error")
    if failures:
        logger.warning("sweep over %s: %d of %d runs failed", axis, failures, len(rows))
    return target, rows
