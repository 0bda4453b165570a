import io
import json
import os
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

from degengl import cli
from degengl.config import config_json_schema

SCHEMA_PATH = Path(__file__).resolve().parents[1] / "experiments" / "schema.json"


def _run_cli(args: list[str]) -> tuple[int, str, str]:
    out = io.StringIO()
    err = io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = cli.main(args)
    return code, out.getvalue(), err.getvalue()


def _normalize_json_text(text: str) -> str:
    return json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"


def _regen_enabled() -> bool:
    return os.environ.get("REGEN_GOLDENS") == "1"


def test_golden_schema_matches_published_file():
    code, out, err = _run_cli(["schema"])
    assert code == 0, err
    actual_schema = _normalize_json_text(out)

    if _regen_enabled():
        SCHEMA_PATH.write_text(actual_schema, encoding="utf-8", newline="\n")

    expected_schema = _normalize_json_text(SCHEMA_PATH.read_text(encoding="utf-8"))
    assert actual_schema == expected_schema
    assert json.loads(actual_schema) == config_json_schema()


def test_golden_bundled_configs_follow_the_schema():
    schema = json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))
    for path in sorted(SCHEMA_PATH.parent.glob("*.json")):
        if path.name == "schema.json":
            continue
        payload = json.loads(path.read_text(encoding="utf-8"))
        assert set(payload) <= set(schema["properties"]), path.name
        for section, body in payload.items():
            if isinstance(body, dict):
                allowed = schema["properties"][section]["properties"]
                assert set(body) <= set(allowed), f"{path.name}: {section}"
