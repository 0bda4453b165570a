"""Run-config loading, validation, discovery and override helpers."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .registry import CANONICAL_EXPERIMENTS, is_known_experiment, normalize_experiment

_ALLOWED_TOP_KEYS = {
    "name",
    "experiment",
    "description",
    "seed",
    "params",
    "potential",
    "grid",
    "bc",
    "init",
    "solver",
    "audit",
    "profile",
    "induction",
    "sweep",
}

# section -> key -> (kind, default)
_SECTIONS: dict[str, dict[str, tuple[str, Any]]] = {
    "params": {
        "n": ("int", 2),
        "p": ("number", 2.0),
        "m": ("number", 4.0),
        "lam": ("number", 1.0),
        "Lam": ("number", 1.0),
        "Q": ("number", 1.0),
        "eps_reg": ("number?", None),
    },
    "potential": {
        "kind": ("string", "model"),
        "table": ("string?", None),
    },
    "grid": {
        "box": ("box", 40.0),
        "h": ("number", 0.25),
    },
    "bc": {
        "kind": ("string", "two-phase"),
    },
    "init": {
        "kind": ("string", "planar"),
    },
    "solver": {
        "tol": ("number", 1e-6),
        "max_iter": ("int", 200_000),
        "log_every": ("int", 5000),
        "require_converged": ("bool", True),
    },
    "audit": {
        "T": ("int", 5),
        "R0": ("int", 10),
        "R_max": ("int", 30),
        "radii": ("ints", [16, 24, 32]),
        "h_levels": ("numbers", [0.4, 0.2, 0.1]),
        "trials": ("int", 30),
    },
    "profile": {
        "t_min": ("number", -1000.0),
        "t_max": ("number", 1.0),
        "samples": ("int", 4001),
        "window": ("numbers", [-1000.0, -10.0]),
        "tail_T": ("numbers", [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]),
        "epsilon": ("number", 0.05),
        "level": ("number", 0.2),
        "radius_factor": ("number", 4.0),
    },
    "induction": {
        "sigma": ("number", 0.1),
        "C0": ("number", 1.0),
        "c1": ("number?", None),
        "T": ("int", 10),
        "gamma": ("number?", None),
        "R_start": ("int?", None),
        "R_stop": ("int?", None),
        "search_sigma": ("bool", False),
    },
    "sweep": {
        "axis": ("string?", None),
        "values": ("numbers", []),
    },
}

_JSON_TYPES = {
    "int": {"type": "integer"},
    "int?": {"type": ["integer", "null"]},
    "number": {"type": "number"},
    "number?": {"type": ["number", "null"]},
    "string": {"type": "string"},
    "string?": {"type": ["string", "null"]},
    "bool": {"type": "boolean"},
    "ints": {"type": "array", "items": {"type": "integer"}},
    "numbers": {"type": "array", "items": {"type": "number"}},
    "box": {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 3}]},
}


def _experiments_dir(experiments_dir: str | Path | None = None) -> Path:
    if experiments_dir is not None:
        return Path(experiments_dir)
    root = Path(__file__).resolve().parents[2]
    return root / "experiments"


def _schema_path(experiments_dir: str | Path | None = None) -> Path:
    return _experiments_dir(experiments_dir) / "schema.json"


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_value(kind: str, value: Any) -> bool:
    if kind.endswith("?"):
        if value is None:
            return True
        kind = kind[:-1]
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return _is_number(value)
    if kind == "string":
        return isinstance(value, str) and bool(value.strip())
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "ints":
        return isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    if kind == "numbers":
        return isinstance(value, list) and all(_is_number(v) for v in value)
    if kind == "box":
        return _is_number(value) or (isinstance(value, list) and 1 <= len(value) <= 3 and all(_is_number(v) for v in value))
    raise AssertionError(kind)


def validate_config_payload(payload: Any, *, source: str = "config") -> None:
    """Validate a run-config payload against the published schema expectations."""
    if not isinstance(payload, dict):
        raise ConfigError(f"invalid config for {source}: expected object")

    unknown_keys = sorted(set(payload) - _ALLOWED_TOP_KEYS)
    if unknown_keys:
        raise ConfigError(f"invalid config for {source}: unexpected key(s): {', '.join(unknown_keys)}")

    name = payload.get("name")
    if not isinstance(name, str) or not name.strip():
        raise ConfigError(f"invalid config for {source}: name must be a non-empty string")

    experiment = payload.get("experiment")
    if not isinstance(experiment, str) or not is_known_experiment(experiment):
        known = ", ".join(sorted(CANONICAL_EXPERIMENTS))
        raise ConfigError(f"invalid config for {source}: experiment must be one of {known}, got {experiment!r}")

    seed = payload.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"invalid config for {source}: seed must be a non-negative integer")

    description = payload.get("description")
    if description is not None and not isinstance(description, str):
        raise ConfigError(f"invalid config for {source}: description must be string")

    for section, keys in _SECTIONS.items():
        body = payload.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"invalid config for {source}: {section} must be object")
        unknown = sorted(set(body) - set(keys))
        if unknown:
            raise ConfigError(f"invalid config for {source}: unexpected key(s) in {section}: {', '.join(unknown)}")
        for key, value in body.items():
            kind, _default = keys[key]
            if not _check_value(kind, value):
                raise ConfigError(
                    f"invalid config for {source}: {section}.{key} must be {kind}, got {type(value).__name__}"
                )


@dataclass(frozen=True)
class RunConfig:
    """A validated config with every section filled from defaults."""

    name: str
    experiment: str
    description: str
    seed: int
    sections: dict[str, dict[str, Any]]

    def section(self, name: str) -> dict[str, Any]:
        return dict(self.sections[name])

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "name": self.name,
            "experiment": self.experiment,
            "description": self.description,
            "seed": self.seed,
        }
        payload.update(copy.deepcopy(self.sections))
        return payload

    def canonical_json(self) -> str:
        return json.dumps(self.to_payload(), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, overrides: dict[str, Any]) -> RunConfig:
        return build_config(apply_overrides(self.to_payload(), overrides), source=self.name)


def build_config(payload: dict[str, Any], *, source: str = "config") -> RunConfig:
    validate_config_payload(payload, source=source)
    sections: dict[str, dict[str, Any]] = {}
    for section, keys in _SECTIONS.items():
        merged = {key: copy.deepcopy(default) for key, (_kind, default) in keys.items()}
        merged.update(copy.deepcopy(payload.get(section) or {}))
        for key, (kind, _default) in keys.items():
            if kind == "number" and _is_number(merged[key]):
                merged[key] = float(merged[key])
        sections[section] = merged
    return RunConfig(
        name=payload["name"].strip(),
        experiment=normalize_experiment(payload["experiment"]),
        description=payload.get("description") or "",
        seed=int(payload.get("seed", 0)),
        sections=sections,
    )


def _load_config_from_path(path: Path) -> RunConfig:
    payload = json.loads(path.read_text(encoding="utf-8"))
    return build_config(payload, source=path.stem)


def discover_configs(*, experiments_dir: str | Path | None = None) -> tuple[dict[str, RunConfig], list[str]]:
    folder = _experiments_dir(experiments_dir)
    if not folder.exists():
        return {}, []

    valid: dict[str, RunConfig] = {}
    invalid: list[str] = []
    for path in sorted(folder.glob("*.json")):
        if not path.is_file() or path.name == "schema.json":
            continue
        try:
            valid[path.stem] = _load_config_from_path(path)
        except (ConfigError, json.JSONDecodeError, OSError) as exc:
            invalid.append(f"{path.stem}: {exc}")
    return valid, invalid


def list_configs(*, experiments_dir: str | Path | None = None, experiment: str | None = None) -> list[str]:
    valid, _invalid = discover_configs(experiments_dir=experiments_dir)
    names = sorted(valid)
    if experiment is None:
        return names
    wanted = normalize_experiment(experiment)
    return [name for name in names if valid[name].experiment == wanted]


def read_config(name_or_path: str | Path, *, experiments_dir: str | Path | None = None) -> RunConfig:
    """Load a bundled config by name, or any config file by path."""
    candidate = Path(name_or_path)
    if candidate.suffix == ".json" or candidate.exists():
        path = candidate
    else:
        path = _experiments_dir(experiments_dir) / f"{name_or_path}.json"
    if not path.exists():
        available = list_configs(experiments_dir=experiments_dir)
        available_text = ", ".join(available) if available else "(none)"
        raise ConfigError(f"config not found: {name_or_path}. available configs: {available_text}")
    try:
        return _load_config_from_path(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid config for {path.stem}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"failed reading config {path}: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{exc}. Fix {path} to match {_schema_path(experiments_dir)}") from exc


def default_config(experiment: str, *, name: str | None = None) -> RunConfig:
    canonical = normalize_experiment(experiment)
    return build_config({"name": name or canonical, "experiment": canonical})


# -- overrides ------------------------------------------------------------------------


def coerce_override_value(raw: str) -> object:
    lower = raw.lower()
    if lower == "true":
        return True
    if lower == "false":
        return False
    if lower == "null":
        return None
    if "," in raw:
        return [coerce_override_value(part.strip()) for part in raw.split(",") if part.strip()]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_set_overrides(tokens: list[str]) -> dict[str, object]:
    """Parse ``section.key=value`` tokens; top-level keys take no section."""
    overrides: dict[str, object] = {}
    for token in tokens:
        if "=" not in token:
            raise ConfigError(f"invalid --set token '{token}': expected section.key=value")
        key, raw_value = token.split("=", 1)
        if not key or raw_value == "":
            raise ConfigError(f"invalid --set token '{token}': expected section.key=value")
        overrides[key] = coerce_override_value(raw_value)
    return overrides


def apply_overrides(payload: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(payload)
    for dotted, value in overrides.items():
        if "." not in dotted:
            if dotted not in _ALLOWED_TOP_KEYS or dotted in _SECTIONS:
                raise ConfigError(f"invalid override '{dotted}': expected section.key or a top-level scalar key")
            merged[dotted] = value
            continue
        section, key = dotted.split(".", 1)
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(f"invalid override '{dotted}': unknown section or key")
        kind = _SECTIONS[section][key][0]
        if kind in ("number", "number?") and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind in ("numbers", "ints") and not isinstance(value, list):
            value = [value]
        merged.setdefault(section, {})
        merged[section] = dict(merged[section] or {})
        merged[section][key] = value
    return merged


# -- schema ---------------------------------------------------------------------------


def config_json_schema() -> dict[str, Any]:
    properties: dict[str, Any] = {
        "name": {"type": "string", "minLength": 1},
        "experiment": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    }
    for section, keys in _SECTIONS.items():
        properties[section] = {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                key: dict(_JSON_TYPES[kind], default=default) for key, (kind, default) in keys.items()
            },
        }
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "degengl run config",
        "type": "object",
        "additionalProperties": False,
        "required": ["name", "experiment"],
        "properties": properties,
    }
