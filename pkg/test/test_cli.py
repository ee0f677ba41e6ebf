import json

import pytest
import yaml
from click.testing import CliRunner

from app.cli import main, parse_patch
from app.errors import ConfigError


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def read(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def test_parse_patch():
    assert parse_patch("4x5") == [4, 5]
    assert parse_patch(None) is None
    with pytest.raises(ConfigError) as info:
        parse_patch("4by4")
    assert info.value.field == "models.0.patch"


def test_check_lto1_writes_report(runner, tmp_path):
    out = tmp_path / "reports" / "lto1.json"
    result = runner.invoke(main, ["check", "--patch", "4x4", "--check", "lto1", "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    merged = read(out)
    assert merged["pass"]
    assert merged["count"] == 1
    assert merged["reports"][0]["dims"]["span_rank"] == 1
    assert "1/1 passed" in result.stdout


def test_reports_are_reproducible(runner, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for out in (first, second):
        result = runner.invoke(main, ["check", "--check", "lto1", "--check", "product_state", "--out", str(out)])
        assert result.exit_code == 0, result.stderr
    assert first.read_bytes() == second.read_bytes()


def test_unknown_check_exits_with_two(runner):
    result = runner.invoke(main, ["check", "--check", "lto9"])
    assert result.exit_code == 2
    assert "CONFIG_INVALID (checks.0)" in result.stderr


def test_bad_patch_exits_with_two(runner):
    result = runner.invoke(main, ["check", "--patch", "4by4"])
    assert result.exit_code == 2
    assert "models.0.patch" in result.stderr


def test_config_without_checks_runs_nothing(runner, tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text(yaml.safe_dump({"checks": []}))
    result = runner.invoke(main, ["check", "--config", str(path)])
    assert result.exit_code == 0, result.stderr
    assert "0/0 passed" in result.stdout


def test_skein_modular(runner, tmp_path):
    out = tmp_path / "skein.json"
    result = runner.invoke(main, ["skein", "--cat", "fibonacci", "--n", "1", "--check", "skein_modular", "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    report = read(out)["reports"][0]
    assert report["check"] == "skein_modular"
    assert report["model"]["category"] == "fibonacci"


def test_tomita_support_suite(runner, tmp_path):
    out = tmp_path / "tomita.json"
    result = runner.invoke(main, ["tomita", "--samples", "3", "--check", "toolkit_support", "--out", str(out)])
    assert result.exit_code == 0, result.stderr
    report = read(out)["reports"][0]
    assert report["dims"]["samples"] == 3
    assert report["details"]["counterexample"]["central_support_rank"] == 1


def test_report_command(runner, tmp_path):
    path = tmp_path / "merged.json"
    passing = {"check": "lto1", "pass": True, "model": {"kind": "toric", "patch": [4, 4]}, "residuals": {"max_residual": 0.0}}
    path.write_text(json.dumps({"pass": True, "count": 1, "failed": [], "reports": [passing]}))
    result = runner.invoke(main, ["report", str(path)])
    assert result.exit_code == 0
    assert "PASS" in result.stdout

    failing = dict(passing, **{"pass": False, "error": {"code": "BAD_AXIS", "message": "", "detail": {}}})
    path.write_text(json.dumps(failing))
    result = runner.invoke(main, ["report", str(path), "--json"])
    assert result.exit_code == 1
    assert json.loads(result.stdout)["rows"][0]["error"] == "BAD_AXIS"


def test_report_without_reports_is_invalid(runner, tmp_path):
    path = tmp_path / "other.json"
    path.write_text(json.dumps({"hello": "world"}))
    result = runner.invoke(main, ["report", str(path)])
    assert result.exit_code == 2


def test_report_against_golden_copy(runner, tmp_path):
    current, golden = tmp_path / "current.json", tmp_path / "golden.json"
    for out in (current, golden):
        result = runner.invoke(main, ["check", "--patch", "4x4", "--check", "lto1", "--out", str(out)])
        assert result.exit_code == 0, result.stderr
    result = runner.invoke(main, ["report", str(current), "--golden", str(golden)])
    assert result.exit_code == 0, result.stderr

    stored = read(golden)
    stored["reports"][0]["dims"]["span_rank"] = 2
    golden.write_text(json.dumps(stored))
    result = runner.invoke(main, ["report", str(current), "--golden", str(golden)])
    assert result.exit_code == 1
    assert "golden mismatch .reports[0].dims.span_rank: 1 != 2" in result.stderr
