from degengl.registry import (
    CANONICAL_EXPERIMENTS,
    EXPERIMENT_ALIASES,
    axis_applies,
    is_known_axis,
    is_known_experiment,
    normalize_experiment,
)


def test_aliases_resolve_to_canonical_experiments():
    for alias, canonical in EXPERIMENT_ALIASES.items():
        assert normalize_experiment(alias) == canonical
        assert canonical in CANONICAL_EXPERIMENTS
    assert normalize_experiment("density-3d") == "density-3d"


def test_known_experiments_and_axes():
    assert is_known_experiment("tails")
    assert not is_known_experiment("relay")
    assert is_known_axis("m")
    assert not is_known_axis("q")


def test_box_axis_only_applies_to_solver_experiments():
    assert axis_applies("L", "density")
    assert not axis_applies("L", "induction")
    assert axis_applies("m", "profile-tails")
