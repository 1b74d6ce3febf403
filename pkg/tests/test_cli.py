"""Command line: exit codes, config errors, reports and determinism."""

import json
from pathlib import Path

import pytest

from ncprob.cli import config as cfg
from ncprob.cli.main import CHECK_DOCS, main
from ncprob.cli.runner import run_scenario

DOCS_SCHEMA = Path(__file__).resolve().parents[1] / "docs" / "scenario.schema.json"


def write(tmp_path, config, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config))
    return str(path)


def small(**extra):
    config = {
        "name": "small",
        "model": {"kind": "codomain_perturbed", "omega": -1},
        "window": 4,
        "checks": [{"type": "symmetry", "kind": "stationary", "degree": 4}],
    }
    config.update(extra)
    return config


def strip_timing(report):
    report = dict(report)
    report.pop("timing")
    return report


def test_missing_window_is_a_config_error(tmp_path, capsys):
    bad = small()
    del bad["window"]
    assert main(["run", write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "window" in err and "config error" in err


def test_invalid_field_reports_pointer(tmp_path, capsys):
    bad = small()
    bad["checks"][0]["degree"] = "four"
    assert main(["run", write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    assert "/checks/0/degree" in capsys.readouterr().err


def test_semantic_window_error(tmp_path, capsys):
    bad = small()
    bad["checks"][0]["window"] = 9
    assert main(["run", write(tmp_path, bad), "--out", str(tmp_path)]) == 2
    assert "/checks/0" in capsys.readouterr().err


def test_unreadable_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["run", str(path), "--out", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_jobs_must_be_positive(tmp_path):
    assert main(["run", "definetti_counterexample", "--out", str(tmp_path), "--jobs", "0"]) == 2


def test_unexpected_failure_exits_one(tmp_path, capsys):
    assert main(["run", write(tmp_path, small()), "--out", str(tmp_path)]) == 1
    assert "BAD" in capsys.readouterr().out
    inverted = small()
    inverted["checks"][0]["expect"] = "fail"
    assert main(["run", write(tmp_path, inverted), "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("name", ["definetti_counterexample", "coin_ci"])
def test_headline_scenarios_exit_zero(tmp_path, name):
    assert main(["run", name, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / f"{name}.report.json").read_text())
    assert report["summary"]["exit_code"] == 0
    assert report["provenance"]["scenario_sha256"]
    assert report["artifact"]["name"] == "artifact"


def test_definetti_report_contents(tmp_path):
    report, code = run_scenario(cfg.load("definetti_counterexample"), tmp_path)
    assert code == 0
    checks = {c["id"]: c for c in report["checks"]}
    assert checks["stationary"]["status"] == "fail"
    w = checks["stationary"]["result"]["witness"]
    assert w["gap"] == pytest.approx(2, abs=1e-10)
    assert checks["m0101"]["status"] == "pass" and checks["identical"]["status"] == "pass"
    assert [c["id"] for c in report["checks"]] == [c["id"] for c in cfg.load("definetti_counterexample")["checks"]]


def test_jobs_do_not_change_reports(tmp_path):
    a, _ = run_scenario(cfg.load("coin_ci"), tmp_path / "a", jobs=1)
    b, _ = run_scenario(cfg.load("coin_ci"), tmp_path / "b", jobs=4)
    assert strip_timing(a) == strip_timing(b)
    for f in sorted((tmp_path / "a").glob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_reports_are_byte_stable_apart_from_timing(tmp_path):
    run_scenario(cfg.load("definetti_counterexample"), tmp_path / "a")
    run_scenario(cfg.load("definetti_counterexample"), tmp_path / "b")
    a = json.loads((tmp_path / "a" / "definetti_counterexample.report.json").read_text())
    b = json.loads((tmp_path / "b" / "definetti_counterexample.report.json").read_text())
    assert list(a)[-1] == "timing"
    assert json.dumps(strip_timing(a), indent=2) == json.dumps(strip_timing(b), indent=2)


def test_tol_override(tmp_path):
    config = small()
    config["checks"][0]["expect"] = "any"
    report, code = run_scenario(config, tmp_path, tol=5.0)
    assert code == 0 and report["checks"][0]["status"] == "pass"
    assert report["provenance"]["tolerance_override"] == 5.0


def test_complex_parsing():
    assert cfg.parse_complex(2) == 2
    assert cfg.parse_complex({"re": 0, "im": 1}) == 1j
    assert abs(cfg.parse_complex({"phase_degrees": 90}) - 1j) < 1e-15


def test_list_and_describe(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) >= 8
    names = {line.split(":")[0] for line in lines}
    assert {"definetti_counterexample", "coin_ci"} <= names
    assert main(["describe", "spreadable"]) == 0
    out = capsys.readouterr().out
    assert "degree" in out and "window" in out
    assert main(["describe", "rotatable"]) == 2
    err = capsys.readouterr().err
    assert "valid kinds" in err and "exchangeable" in err


def test_every_check_type_is_documented():
    types = cfg.schema()["$defs"]["check"]["properties"]["type"]["enum"]
    assert set(types) <= set(CHECK_DOCS)


def test_schema_copy_in_docs_matches_package():
    assert json.loads(DOCS_SCHEMA.read_text()) == cfg.schema()


def test_shipped_scenarios_validate():
    for name, path in cfg.shipped_scenarios().items():
        config = cfg.load(path)
        assert config["name"] == name
        cfg.validate_schema(config)


@pytest.mark.parametrize("name", sorted(cfg.shipped_scenarios()))
def test_every_shipped_scenario_ends_as_expected(tmp_path, name):
    report, code = run_scenario(cfg.load(name), tmp_path, jobs=2)
    assert code == 0, report["summary"]["unexpected"]
