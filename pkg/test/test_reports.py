import asyncio
import json

import pytest

from app.check_runner import CheckRunner, merge_reports, registry, run_config
from app.config import validate_config
from app.core import lto_checks
from app.core.lattice import region_ladder
from app.core.models import straddle_identities
from app.core.report import CheckReport
from app.errors import ConfigError, RegionError
from app.handlers.lattice_handler import LatticeHandler
from app.utils.file_utils import compare_golden, read_report, report_list, write_report
from app.utils.report_utils import canonical_dumps, render_table, report_frame, summary


def sample_report(check="lto1", passed=True, residual=0.0):
    report = CheckReport.start(check, {"kind": "toric", "patch": [4, 4]}, {"tol": 1e-9})
    report.dims["span_rank"] = 1
    report.residuals["max_residual"] = residual
    return report.finish(passed)


def test_report_json_hides_timing_by_default():
    data = sample_report().to_json(timing=False)
    assert data["seconds"] == 0.0
    assert CheckReport.from_json(data).to_json(timing=False) == data


def test_failed_report_carries_error():
    report = CheckReport.start("hd").fail_with(RegionError("BAD_AXIS", "off the cut"))
    assert not report.passed
    assert report.to_json()["error"]["code"] == "BAD_AXIS"


def test_merge_orders_by_key():
    merged = merge_reports([(("rp", 0, 0), sample_report("rp", False)), (("lto1", 0, 0), sample_report())])
    assert [r["check"] for r in merged["reports"]] == ["lto1", "rp"]
    assert merged["failed"] == ["rp#1"]
    assert not merged["pass"]


def test_canonical_dumps_is_stable():
    a = {"b": 1, "a": [1.5, "x"]}
    assert canonical_dumps(a) == canonical_dumps(json.loads(canonical_dumps(a)))
    assert canonical_dumps(a).index('"a"') < canonical_dumps(a).index('"b"')


def test_report_frame_and_summary():
    merged = merge_reports([(("lto1", 0, 0), sample_report()), (("lto1", 0, 1), sample_report(passed=False, residual=0.5))])
    frame = report_frame(merged)
    assert list(frame["pass"]) == [True, False]
    assert frame["max_residual"].max() == 0.5
    assert frame["model"][0] == "toric 4x4"
    assert summary(frame) == {"total": 2, "passed": 1, "by_check": {"lto1": {"count": 2, "passed": 1}}}
    assert "FAIL" in render_table(frame)


def test_report_list_rejects_other_documents():
    assert len(report_list(sample_report().to_json())) == 1
    with pytest.raises(ConfigError):
        report_list({"rows": []})


def test_write_then_read(tmp_path):
    path = str(tmp_path / "nested" / "out.json")
    text = canonical_dumps(sample_report().to_json(timing=False))
    asyncio.run(write_report(path, text))
    assert asyncio.run(read_report(path)) == json.loads(text)


def test_compare_golden_ignores_timing_and_small_drift():
    golden = sample_report(residual=1e-12).to_json()
    current = sample_report(residual=2e-12).to_json()
    current["seconds"] = 99.0
    assert compare_golden(current, golden) == []
    current["dims"]["span_rank"] = 2
    assert compare_golden(current, golden) == [".dims.span_rank: 2 != 1"]


def test_registry_lists_every_check_once():
    names = [c["name"] for c in registry()["checks"]]
    assert len(names) == len(set(names))
    assert "lattice" in registry()["suites"]


def test_errors_are_recorded_per_job():
    config = validate_config({"models": [{"patch": [4, 4]}], "checks": ["lto1", "hd"], "ladder": [5]})
    merged = run_config(config)
    by_check = {r["check"]: r for r in merged["reports"]}
    assert by_check["lto1"]["pass"]
    assert by_check["hd"]["error"]["code"] == "BAD_INTERVAL"


def test_plan_counts_ladder_rungs():
    config = validate_config({"models": [{"patch": [4, 6]}], "checks": ["straddle_identities"], "ladder": [1, 2, 3]})
    assert len(CheckRunner(config).plan()) == 3


def test_skein_checks_run_once_per_category():
    config = validate_config(
        {"categories": [{"cat": "vec_zn(2)", "n": 1}, {"cat": "ising", "n": 1}], "checks": ["skein_cond_exp"], "jobs": 2}
    )
    merged = run_config(config)
    assert merged["count"] == 2
    assert [r["model"]["category"] for r in merged["reports"]] == ["vec_z2", "ising"]


def test_default_layout_passes_lto_and_hd_suites():
    config = validate_config({"models": [{"patch": [4, 5]}], "checks": ["lto", "hd"], "ladder": [1, 2]})
    merged = run_config(config)
    assert merged["failed"] == []
    assert merged["pass"]
    straddles = [r for r in merged["reports"] if r["check"] == "straddle_identities"]
    assert [r["dims"]["straddling_terms"] for r in straddles] == [2, 3]


def test_straddle_rung_covers_the_cut_column_of_s():
    config = validate_config({"models": [{"patch": [4, 5], "layout": "rotated"}], "ladder": [1]})
    model = config.models[0].build()
    step = region_ladder(model, [1])[0]
    interval = LatticeHandler.straddle_interval(model, step)
    assert [s.to_list() for s in interval.sites] == [[1, 0], [1, 1], [1, 2]]
    assert straddle_identities(model, interval).passed


def test_rank_cutoff_reaches_the_checks(monkeypatch):
    seen = []
    real = lto_checks.check_lto1

    def spy(*args, **kwargs):
        seen.append(kwargs["cutoff"])
        return real(*args, **kwargs)

    monkeypatch.setattr(lto_checks, "check_lto1", spy)
    config = validate_config({"models": [{"patch": [4, 4]}], "checks": ["lto1"], "tolerances": {"rank_cutoff": 1e-6}})
    assert run_config(config)["pass"]
    assert seen == [1e-6]
