import pytest
from fastapi.testclient import TestClient

from app.main import app

client = TestClient(app)

HOUSE_FLIES = {
    "model": {"family": "continuation", "J": 3},
    "design": {"structure": "npo", "per_category": [["1", "dose", "dose^2"], ["1", "dose"]]},
    "data": {
        "covariates": ["dose"],
        "x": [[80], [100], [120], [140], [160], [180], [200]],
        "y": [[62, 5, 433], [94, 24, 382], [179, 60, 261], [335, 80, 85], [432, 46, 22], [487, 11, 2], [498, 2, 0]],
    },
}

CUMULATIVE = {"family": "cumulative", "J": 3}
SLOPE_DESIGN = {"structure": "npo", "covariates": ["x"], "per_category": [["1", "x"], ["1"]]}


def test_health_endpoints():
    assert client.get("/").json()["status"] == "healthy"
    assert client.get("/api/v1/health").json()["service"] == "multinomial_link_models"
    response = client.get("/status")
    assert "X-Process-Time" in response.headers
    assert "model_service" in response.json()


def test_fit_endpoint():
    response = client.post("/api/v1/models/fit", json=HOUSE_FLIES)
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "converged"
    assert body["bic"] == pytest.approx(112.91, abs=0.05)
    assert [c["label"] for c in body["coefficients"]][:2] == ["beta1:1", "beta1:dose"]
    assert body["coefficients"][1]["upper"] == pytest.approx(0.0013, abs=1e-3)
    assert len(body["fitted"]) == 7


def test_status_reports_model_service_counters():
    before = client.get("/status").json()["model_service"]["requests"]["fit"]
    assert client.post("/api/v1/models/fit", json=HOUSE_FLIES).status_code == 200
    body = client.get("/status").json()
    assert body["model_service"]["requests"]["fit"] == before + 1
    assert body["model_service"] == app.state.model_service.get_status()
    assert body["fit_defaults"]["tolerance"] > 0.0
    assert "cloglog" in body["links"]
    assert set(body["guards"]) == {"prob_clamp", "singular_rcond", "rank_tol", "cov_singular_tol"}


def test_lifespan_runs_with_the_client():
    with TestClient(app) as managed:
        assert managed.get("/").json()["status"] == "healthy"


def test_fit_endpoint_rejects_unknown_family():
    payload = dict(HOUSE_FLIES, model={"family": "stereotype", "J": 3})
    response = client.post("/api/v1/models/fit", json=payload)
    assert response.status_code == 400
    assert "stereotype" in response.json()["detail"]


def test_unknown_fields_fail_validation():
    payload = dict(HOUSE_FLIES, extra=True)
    assert client.post("/api/v1/models/fit", json=payload).status_code == 422


def test_feasibility_endpoint():
    payload = {
        "model": CUMULATIVE,
        "design": SLOPE_DESIGN,
        "theta": [0.0, 1.0, 1.0],
        "settings": [[-2.0], [0.0], [2.0]],
    }
    response = client.post("/api/v1/models/feasibility", json=payload)
    assert response.status_code == 200
    assert response.json() == {"feasible": False, "failures": [{"setting": 2, "cause": "nonpositive"}]}


def test_simulate_endpoint():
    payload = {
        "model": CUMULATIVE,
        "design": SLOPE_DESIGN,
        "theta": [0.0, 0.5, 1.0],
        "settings": [[-1.0], [0.0], [1.0]],
        "n": 40,
        "seed": 11,
    }
    first = client.post("/api/v1/models/simulate", json=payload).json()
    second = client.post("/api/v1/models/simulate", json=payload).json()
    assert first == second
    assert [sum(row) for row in first["y"]] == [40, 40, 40]


def test_simulate_endpoint_reports_failing_settings():
    payload = {
        "model": CUMULATIVE,
        "design": SLOPE_DESIGN,
        "theta": [0.0, 1.0, 1.0],
        "settings": [[0.0], [2.0]],
        "seed": 1,
    }
    response = client.post("/api/v1/models/simulate", json=payload)
    assert response.status_code == 422
    assert response.json()["detail"]["failures"] == [{"setting": 1, "cause": "nonpositive"}]


def test_links_endpoint():
    links = client.get("/api/v1/models/links").json()["links"]
    assert "logit" in links and "cauchit" in links
