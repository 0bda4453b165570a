"""Command line interface for degengl."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .audit import (
    density_report,
    discrete_inequality_check,
    induction_simulator,
    main_inequality_report,
    minimal_closing_c1,
    power_seed,
    rho1,
    sandwich_check,
    volume_potential_sequences,
)
from .config import (
    RunConfig,
    config_json_schema,
    default_config,
    discover_configs,
    list_configs,
    parse_set_overrides,
    read_config,
)
from .errors import ConfigError, ConvergenceError, LabError
from .grid import load_snapshot, save_snapshot
from .minimizer import BoundaryCondition, initial_field, measured_zero, minimize
from .profile1d import (
    build_comparison_profile,
    fit_decay_exponent,
    heteroclinic_profile,
    supersolution_profile,
    supersolution_radius,
)
from .runner import (
    RunnerConfig,
    dump_json,
    grid_from,
    params_from,
    potential_from,
    run_experiment,
    sweep,
    write_atomic,
)


def _common_parent() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Bundled config name or path to a config JSON file")
    common.add_argument("--seed", type=int, help="Random seed (overrides the config)")
    common.add_argument("--out", help="Output path or directory (default root: $DEGENGL_OUT or ./runs)")
    common.add_argument("--threads", type=int, default=1, help="Worker processes for sweeps")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    common.add_argument(
        "--set",
        action="append",
        dest="set_items",
        default=[],
        help="Override one config value using section.key=value (repeatable)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degengl", description="Degenerate Ginzburg-Landau numerical lab")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_parent()

    p_profile = sub.add_parser("profile", parents=[common], help="Build a 1-D profile and write it as CSV")
    p_profile.add_argument("--kind", choices=["comparison", "heteroclinic", "supersolution"], default="comparison")
    p_profile.add_argument("--p", type=float)
    p_profile.add_argument("--m", type=float)
    p_profile.add_argument("--t-min", dest="t_min", type=float)
    p_profile.add_argument("--t-max", dest="t_max", type=float)
    p_profile.add_argument("--samples", type=int)
    p_profile.add_argument("--epsilon", type=float, help="Super-solution slope ε")
    p_profile.add_argument("--level", type=float, help="Super-solution closeness h to +1")

    p_min = sub.add_parser("minimize", parents=[common], help="Compute a constrained minimizer")
    p_min.add_argument("--p", type=float)
    p_min.add_argument("--m", type=float)
    p_min.add_argument("--dim", type=int)
    p_min.add_argument("--box", type=float)
    p_min.add_argument("--h", type=float)
    p_min.add_argument("--bc", choices=["two-phase", "natural", "plus", "minus"])
    p_min.add_argument("--init", choices=["random", "planar", "plus", "minus"])
    p_min.add_argument("--tol", type=float)
    p_min.add_argument("--max-iter", dest="max_iter", type=int)

    p_audit = sub.add_parser("audit", parents=[common], help="Audit a saved field around a center")
    p_audit.add_argument("--snapshot", required=True, help="Snapshot path written by `degengl minimize`")
    p_audit.add_argument("--center", default="auto", help="Comma-separated coordinates or 'auto' (measured zero)")
    p_audit.add_argument("--T", dest="T", type=int)
    p_audit.add_argument("--Rmax", dest="R_max", type=int)
    p_audit.add_argument("--R0", dest="R0", type=int)
    p_audit.add_argument("--p", type=float)
    p_audit.add_argument("--m", type=float)
    p_audit.add_argument("--report", help="Write the JSON report here (CSV tables beside it)")

    p_ind = sub.add_parser("simulate-induction", parents=[common], help="Worst-case induction trace")
    p_ind.add_argument("--n", type=int)
    p_ind.add_argument("--sigma", type=float)
    p_ind.add_argument("--T", dest="T", type=int)
    p_ind.add_argument("--C0", dest="C0", type=float)
    p_ind.add_argument("--c1", type=float)
    p_ind.add_argument("--gamma", type=float)
    p_ind.add_argument("--Rstart", dest="R_start", type=int)
    p_ind.add_argument("--Rstop", dest="R_stop", type=int)

    p_sweep = sub.add_parser("sweep", parents=[common], help="Run an experiment across values of one axis")
    p_sweep.add_argument("--axis", help="One of p, m, T, R, h, L (default: the config's sweep.axis)")
    p_sweep.add_argument("--values", default="", help="Comma-separated values (default: the config's sweep.values)")

    p_run = sub.add_parser("run", parents=[common], help="Run an experiment pipeline")
    p_run.add_argument("name", nargs="?", help="Bundled config name or config path (same as --config)")

    p_exp = sub.add_parser("experiments", help="List bundled experiment configs")
    p_exp.add_argument("--experiment", help="Filter by experiment name")

    sub.add_parser("schema", help="Print the run-config JSON schema")
    return parser


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _load_config(args: argparse.Namespace, fallback: str, flags: dict[str, Any] | None = None) -> RunConfig:
    name = getattr(args, "name", None) or args.config
    config = read_config(name) if name else default_config(fallback)
    overrides = parse_set_overrides(args.set_items)
    for key, value in (flags or {}).items():
        if value is not None:
            overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    return config.with_overrides(overrides) if overrides else config


def _print_json(payload: Any) -> None:
    sys.stdout.write(dump_json(payload))


def _write_rows(path: Path, header: list[str], rows: list[tuple[Any, ...]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _parse_center(raw: str, u) -> np.ndarray:
    if raw == "auto":
        return measured_zero(u)
    try:
        return np.array([float(part) for part in raw.split(",")])
    except ValueError as exc:
        raise ConfigError(f"invalid --center {raw!r}: expected 'auto' or comma-separated numbers") from exc


def _cmd_profile(args: argparse.Namespace) -> int:
    config = _load_config(
        args,
        "profile-tails",
        {
            "params.p": args.p,
            "params.m": args.m,
            "profile.t_min": args.t_min,
            "profile.t_max": args.t_max,
            "profile.samples": args.samples,
            "profile.epsilon": args.epsilon,
            "profile.level": args.level,
        },
    )
    params = params_from(config)
    P = potential_from(config, params)
    section = config.section("profile")
    t_grid = np.linspace(section["t_min"], section["t_max"], section["samples"])
    summary: dict[str, Any] = {"kind": args.kind, "regime": params.regime}
    if args.kind == "comparison":
        prof = build_comparison_profile(params.p, params.m, t_grid)
        summary["decay_exponent"] = fit_decay_exponent(prof, (section["window"][0], section["window"][1]))
        summary["expected_decay"] = params.decay_exponent
    elif args.kind == "heteroclinic":
        prof = heteroclinic_profile(params.p, P, t_grid)
    else:
        prof = supersolution_profile(section["level"], params.p, P, section["epsilon"])
        summary["r_heuristic"] = supersolution_radius(prof, params.n)
    summary["meta"] = prof.meta.to_json_dict()
    if args.out:
        target = Path(args.out)
        sidecar = target.with_suffix(".meta.json")
        _write_rows(target, ["t", "u", "du"], prof.rows())
        write_atomic(sidecar, dump_json(summary))
        summary["csv"] = str(target)
        summary["meta_json"] = str(sidecar)
    _print_json(summary)
    return 0


def _cmd_minimize(args: argparse.Namespace) -> int:
    config = _load_config(
        args,
        "density-2d",
        {
            "params.p": args.p,
            "params.m": args.m,
            "params.n": args.dim,
            "grid.box": args.box,
            "grid.h": args.h,
            "bc.kind": args.bc,
            "init.kind": args.init,
            "solver.tol": args.tol,
            "solver.max_iter": args.max_iter,
        },
    )
    params = params_from(config)
    P = potential_from(config, params)
    grid = grid_from(config, params)
    solver = config.section("solver")
    bc = BoundaryCondition.from_name(config.section("bc")["kind"])
    u0 = initial_field(grid, config.section("init")["kind"], params, P, np.random.default_rng(config.seed))
    u0.assign(bc.apply(u0.values, grid))
    u, report = minimize(u0, bc, params, P, solver["tol"], solver["max_iter"], log_every=solver["log_every"])
    payload = report.to_json_dict(trace_stride=max(len(report.energy_trace) // 1000, 1))
    if args.out:
        payload["snapshot"] = str(save_snapshot(u, args.out))
    _print_json(payload)
    if not report.converged:
        print(f"warn: not converged after {report.iterations} iterations", file=sys.stderr)
        return ConvergenceError.exit_code
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    u = load_snapshot(args.snapshot)
    config = _load_config(
        args,
        "density-2d",
        {
            "params.n": u.grid.n,
            "params.p": args.p,
            "params.m": args.m,
            "audit.T": args.T,
            "audit.R_max": args.R_max,
            "audit.R0": args.R0,
        },
    )
    params = params_from(config)
    params.require_degenerate()
    P = potential_from(config, params)
    section = config.section("audit")
    center = _parse_center(args.center, u)
    n = u.grid.n
    seq = volume_potential_sequences(u, center, section["R_max"], params, P).with_mixture(section["T"], params.p, params.m)
    discrete = discrete_inequality_check(seq, n)
    records = [
        main_inequality_report(u, center, R, section["T"], params, P)
        for R in section["radii"]
        if R + 1 <= section["R_max"]
    ]
    report = {
        "center": center.tolist(),
        "sequences": seq.to_json_dict(),
        "density": density_report(u, center, section["R0"], section["R_max"], params).to_json_dict(),
        "discrete": discrete.to_json_dict(),
        "sandwich": sandwich_check(seq, n, discrete.C0).to_json_dict(),
        "main": [record.to_json_dict() for record in records],
        "passed": discrete.passed,
    }
    if args.report:
        target = Path(args.report)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(dump_json(report), encoding="utf-8")
        stem = target.with_suffix("")
        _write_rows(Path(f"{stem}_sequences.csv"), ["R", "V", "P", "M"], seq.rows())
        _write_rows(
            Path(f"{stem}_discrete.csv"),
            ["R", "bracket", "lhs", "rhs", "slack"],
            [(r.R, r.bracket, r.lhs, r.rhs, r.slack) for r in discrete.rows],
        )
        _write_rows(Path(f"{stem}_main.csv"), ["R", "lhs", "rhs", "ratio"], [(r.R, r.lhs, r.rhs, r.ratio) for r in records])
        print(str(target))
    else:
        _print_json(report)
    return 0


def _cmd_simulate_induction(args: argparse.Namespace) -> int:
    config = _load_config(
        args,
        "induction",
        {
            "params.n": args.n,
            "induction.sigma": args.sigma,
            "induction.T": args.T,
            "induction.C0": args.C0,
            "induction.c1": args.c1,
            "induction.gamma": args.gamma,
            "induction.R_start": args.R_start,
            "induction.R_stop": args.R_stop,
        },
    )
    params = params_from(config)
    section = config.section("induction")
    n, T, sigma, C0 = params.n, section["T"], section["sigma"], section["C0"]
    gamma = section["gamma"] if section["gamma"] is not None else params.gamma
    c1 = section["c1"] if section["c1"] is not None else 1.1 * minimal_closing_c1(n, sigma, T, gamma, C0)
    R_start = section["R_start"] if section["R_start"] is not None else int(math.ceil(rho1(n, sigma, T, C0)))
    R_stop = section["R_stop"] if section["R_stop"] is not None else 4 * R_start
    trace = induction_simulator(n, sigma, T, C0, c1, gamma, power_seed(sigma, n, R_start, T), R_start, R_stop)
    if args.out:
        _write_rows(
            Path(args.out),
            ["R", "M_next", "increment", "above_rho1", "chain_ok", "ind_ok", "step_ok"],
            trace.rows(),
        )
    _print_json(trace.to_json_dict())
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args, "profile-tails")
    section = config.section("sweep")
    axis = args.axis or section["axis"]
    if not axis:
        raise ConfigError("sweep needs --axis or sweep.axis in the config")
    values = parse_set_overrides([f"v={args.values}"])["v"] if args.values else section["values"]
    if not isinstance(values, list):
        values = [values]
    target, rows = sweep(config, axis, values, runner=RunnerConfig(workdir=args.out, threads=args.threads))
    _print_json({"table": str(target), "rows": rows})
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    if not (args.name or args.config):
        raise ConfigError("run needs a config name or path (see `degengl experiments`)")
    config = _load_config(args, "density-2d")
    outcome = run_experiment(config, runner=RunnerConfig(workdir=args.out))
    _print_json({"experiment": outcome.experiment, "run_dir": str(outcome.run_dir), "summary": outcome.summary})
    return 0


def _cmd_experiments(args: argparse.Namespace) -> int:
    _valid, invalid = discover_configs()
    for warning in invalid:
        print(f"warn: skipping invalid config ({warning})", file=sys.stderr)
    for name in list_configs(experiment=args.experiment):
        print(name)
    return 0


_COMMANDS = {
    "profile": _cmd_profile,
    "minimize": _cmd_minimize,
    "audit": _cmd_audit,
    "simulate-induction": _cmd_simulate_induction,
    "sweep": _cmd_sweep,
    "run": _cmd_run,
    "experiments": _cmd_experiments,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(json.dumps(config_json_schema(), indent=2, sort_keys=True))
        return 0

    _configure_logging(getattr(args, "quiet", False))
    try:
        return _COMMANDS[args.command](args)
    except LabError as exc:
        record = {"kind": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
        print(f"error: {json.dumps(record, sort_keys=True)}", file=sys.stderr)
        return exc.exit_code
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: {json.dumps({'kind': 'io', 'message': str(exc), 'exit_code': 1}, sort_keys=True)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
