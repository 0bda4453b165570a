import json

import pytest

from degengl.cli import main


def _error_record(err: str) -> dict:
    line = [line for line in err.splitlines() if line.startswith("error: ")][-1]
    return json.loads(line[len("error: "):])


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("degengl ")


def test_cli_schema(capsys):
    code = main(["schema"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["required"] == ["name", "experiment"]
    assert "induction" in payload["properties"]


def test_cli_experiments_lists_bundled_configs(capsys):
    code = main(["experiments"])
    names = capsys.readouterr().out.split()
    assert code == 0
    assert names == sorted(names)
    assert "density-2d" in names and "supersolution" in names


def test_cli_profile_comparison_writes_csv(capsys, tmp_path):
    target = tmp_path / "U.csv"
    code = main(["profile", "--kind", "comparison", "--p", "2", "--m", "4", "--out", str(target), "--quiet"])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0
    assert summary["decay_exponent"] == pytest.approx(1.0, abs=1e-6)
    lines = target.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,u,du"
    assert len(lines) == 4002
    meta = json.loads((tmp_path / "U.meta.json").read_text(encoding="utf-8"))
    assert summary["meta_json"] == str(tmp_path / "U.meta.json")
    assert meta["kind"] == "comparison"
    assert meta["decay_exponent"] == pytest.approx(1.0, abs=1e-6)
    assert meta["expected_decay"] == pytest.approx(1.0)
    assert (meta["meta"]["p"], meta["meta"]["m"]) == (2.0, 4.0)
    assert meta["meta"]["a"] is None and meta["meta"]["b"] == 1.0
    assert set(meta["meta"]) >= {"epsilon", "eta", "s0", "s1"}


def test_cli_rejects_non_degenerate_profile(capsys):
    code = main(["profile", "--kind", "comparison", "--p", "2", "--m", "2"])
    record = _error_record(capsys.readouterr().err)
    assert code == 1
    assert record == {"exit_code": 1, "kind": "parameter", "message": record["message"]}
    assert "m > p" in record["message"]


def test_cli_run_profile_tails(capsys, tmp_path):
    code = main(["run", "profile-tails", "--out", str(tmp_path / "run"), "--quiet"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["experiment"] == "profile-tails"
    assert payload["summary"]["gamma"] == pytest.approx(3.0)
    assert (tmp_path / "run" / "report.json").is_file()


def test_cli_run_reports_unknown_configs(capsys):
    code = main(["run", "nope"])
    record = _error_record(capsys.readouterr().err)
    assert code == 1
    assert record["kind"] == "config"
    assert "available configs" in record["message"]
    assert main(["run"]) == 1


def test_cli_simulate_induction(capsys, tmp_path):
    target = tmp_path / "trace.csv"
    args = ["simulate-induction", "--n", "2", "--sigma", "0.1", "--T", "10", "--C0", "1", "--c1", "2"]
    code = main(args + ["--Rstart", "800", "--Rstop", "900", "--out", str(target), "--quiet"])
    trace = json.loads(capsys.readouterr().out)
    assert code == 0
    assert trace["maintained"] is True
    assert trace["steps"] == 100
    assert len(target.read_text(encoding="utf-8").splitlines()) == 101

    code = main(args + ["--Rstart", "50", "--Rstop", "100", "--quiet"])
    trace = json.loads(capsys.readouterr().out)
    assert code == 0
    assert trace["maintained"] is False
    assert trace["below_rho1"] is True
    assert trace["first_violation"]["reasons"] == ["chain", "ind"]


def _minimize_args(target, *extra):
    return [
        "minimize",
        "--dim", "1",
        "--p", "2",
        "--m", "2",
        "--box", "20",
        "--h", "0.1",
        "--bc", "two-phase",
        "--init", "planar",
        "--out", str(target),
        "--quiet",
        *extra,
    ]


def test_cli_minimize_then_audit(capsys, tmp_path):
    snapshot = tmp_path / "u.f64"
    code = main(_minimize_args(snapshot))
    solve = json.loads(capsys.readouterr().out)
    assert code == 0
    assert solve["converged"] is True
    assert snapshot.is_file()

    report = tmp_path / "audit" / "report.json"
    code = main(
        ["audit", "--snapshot", str(snapshot), "--p", "2", "--m", "4", "--T", "2", "--Rmax", "8", "--R0", "2",
         "--report", str(report), "--quiet"]
    )
    assert code == 0
    assert capsys.readouterr().out.strip() == str(report)
    payload = json.loads(report.read_text(encoding="utf-8"))
    assert payload["sequences"]["radii"] == list(range(9))
    assert payload["density"]["center_is_zero"] is True
    for suffix in ("sequences", "discrete", "main"):
        assert (tmp_path / "audit" / f"report_{suffix}.csv").is_file()


def test_cli_minimize_without_convergence_exits_2(capsys, tmp_path):
    code = main(_minimize_args(tmp_path / "u.f64", "--max-iter", "1"))
    captured = capsys.readouterr()
    assert code == 2
    assert json.loads(captured.out)["converged"] is False
    assert "not converged" in captured.err


def test_cli_audit_with_oversized_ball_exits_3(capsys, tmp_path):
    snapshot = tmp_path / "u.f64"
    main(_minimize_args(snapshot, "--max-iter", "50"))
    capsys.readouterr()
    code = main(["audit", "--snapshot", str(snapshot), "--p", "2", "--m", "4", "--Rmax", "50", "--center", "0"])
    record = _error_record(capsys.readouterr().err)
    assert code == 3
    assert record["kind"] == "geometry"


def test_cli_audit_rejects_a_bad_center(capsys, tmp_path):
    snapshot = tmp_path / "u.f64"
    main(_minimize_args(snapshot, "--max-iter", "50"))
    capsys.readouterr()
    code = main(["audit", "--snapshot", str(snapshot), "--p", "2", "--m", "4", "--center", "middle"])
    assert code == 1
    assert "invalid --center" in _error_record(capsys.readouterr().err)["message"]


def test_cli_sweep_needs_values(capsys, tmp_path):
    code = main(["sweep", "--config", "profile-tails", "--axis", "m", "--out", str(tmp_path)])
    record = _error_record(capsys.readouterr().err)
    assert code == 1
    assert "at least one value" in record["message"]


def test_cli_sweep_over_m(capsys, tmp_path):
    code = main(["sweep", "--config", "profile-tails", "--axis", "m", "--values", "3,6", "--out", str(tmp_path), "--quiet"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert [row["status"] for row in payload["rows"]] == ["ok", "ok"]
    assert payload["table"] == str(tmp_path / "sweep.csv")


def test_cli_sweep_reads_axis_and_values_from_the_config(capsys, tmp_path):
    code = main(
        ["sweep", "--config", "profile-tails", "--set", "sweep.axis=m", "--set", "sweep.values=4",
         "--out", str(tmp_path), "--quiet"]
    )
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert [row["value"] for row in payload["rows"]] == [4]
    assert main(["sweep", "--config", "profile-tails"]) == 1
