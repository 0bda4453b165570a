"""Canonical experiment names and their aliases."""

from __future__ import annotations

CANONICAL_EXPERIMENTS = {
    "profile-tails",
    "tanh-1d",
    "density-2d",
    "density-3d",
    "induction",
    "supersolution",
}
EXPERIMENT_ALIASES = {
    "tails": "profile-tails",
    "tanh": "tanh-1d",
    "density": "density-2d",
    "slab": "density-3d",
    "simulate-induction": "induction",
    "super": "supersolution",
}

# experiments whose pipeline solves for a minimizer
SOLVER_EXPERIMENTS = {"tanh-1d", "density-2d", "density-3d"}

SWEEP_AXES = {
    "p": ("params", "p"),
    "m": ("params", "m"),
    "T": ("audit", "T"),
    "R": ("audit", "R_max"),
    "h": ("grid", "h"),
    "L": ("grid", "box"),
}


def normalize_experiment(name: str) -> str:
    return EXPERIMENT_ALIASES.get(name, name)


def is_known_experiment(name: str) -> bool:
    return normalize_experiment(name) in CANONICAL_EXPERIMENTS


def is_known_axis(axis: str) -> bool:
    return axis in SWEEP_AXES


def axis_applies(axis: str, experiment: str) -> bool:
    """Box sweeps only change something for pipelines that solve on the box."""
    if axis == "L":
        return normalize_experiment(experiment) in SOLVER_EXPERIMENTS
    return True
