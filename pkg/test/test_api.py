import pytest
from fastapi.testclient import TestClient

from app.check_runner import CheckRunner
from app.errors import ModelError
from app.main import app


@pytest.fixture
def client():
    return TestClient(app)


def test_root(client):
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["name"] == "LTO Verifier API"


def test_list_checks(client):
    data = client.get("/api/checks").json()
    names = {c["name"] for c in data["checks"]}
    assert {"lto1", "rp", "skein_duality", "toolkit_support"} <= names
    assert data["suites"]["tomita"] == ["toolkit_modular", "toolkit_support"]


def test_invalid_config_is_unprocessable(client):
    response = client.post("/api/run", json={"checks": ["nope"]})
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["code"] == "CONFIG_INVALID"
    assert detail["detail"]["field"] == "checks.0"


def test_run_lattice_and_skein_checks(client, tmp_path):
    out = tmp_path / "ignored.json"
    config = {
        "models": [{"kind": "toric", "patch": [4, 4]}],
        "categories": [{"cat": "fibonacci", "n": 1}],
        "checks": ["lto1", "skein_modular"],
        "out": str(out),
    }
    response = client.post("/api/run", json=config)
    assert response.status_code == 200
    merged = response.json()
    assert merged["count"] == 2
    assert [r["check"] for r in merged["reports"]] == ["lto1", "skein_modular"]
    assert not out.exists()


def test_failing_check_is_still_a_report(client):
    config = {
        "models": [{"kind": "toric", "patch": [4, 4], "layout": "square"}],
        "checks": ["rp"],
    }
    merged = client.post("/api/run", json=config).json()
    assert not merged["pass"]
    assert merged["reports"][0]["error"]["code"] == "NOT_SYMMETRIC"


def test_report_summary(client):
    document = {
        "reports": [
            {"check": "lto1", "pass": True, "residuals": {"max_residual": 0.0}},
            {"check": "lto1", "pass": False, "residuals": {"max_residual": 1.0}},
        ]
    }
    data = client.post("/api/report", json=document).json()
    assert data["summary"]["total"] == 2
    assert data["summary"]["by_check"]["lto1"] == {"count": 2, "passed": 1}
    assert len(data["rows"]) == 2


def test_report_without_reports(client):
    response = client.post("/api/report", json={"hello": "world"})
    assert response.status_code == 422


def test_check_error_outside_a_job_is_a_server_error(client, monkeypatch):
    async def broken(self):
        raise ModelError("BUDGET_EXCEEDED", "patch too large")

    monkeypatch.setattr(CheckRunner, "run", broken)
    response = client.post("/api/run", json={"models": [{"patch": [4, 4]}], "checks": ["lto1"]})
    assert response.status_code == 500
    assert response.json()["detail"]["code"] == "BUDGET_EXCEEDED"
