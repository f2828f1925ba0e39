import os

import pytest
from fastapi.testclient import TestClient

from src.api.server import app

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture()
def client(monkeypatch):
    monkeypatch.setenv("AUCTION_SCENARIO_DIR", os.path.join(ROOT, "src", "scenarios"))
    monkeypatch.setenv("AUCTION_PROGRESS", "0")
    return TestClient(app)


def test_health_and_scenarios(client):
    assert client.get("/health").json() == {"status": "ok"}
    names = {s["name"] for s in client.get("/scenarios").json()}
    assert "v_ex" in names


def test_value_dp(client):
    r = client.post("/value-dp", json={"instance": "v_ex"})
    assert r.status_code == 200
    assert r.json()["W"] == "71/10"


def test_inline_scenario_trace(client):
    doc = {
        "M": 2,
        "m": [1, 1],
        "p_min": ["0", "0"],
        "eps": ["1/4", "1/4"],
        "valuations": {
            "opponent": {"0,0": "0", "1,0": "4", "0,1": "3", "1,1": "6"},
            "player": {"0,0": "0", "1,0": "10", "0,1": "1", "1,1": "20"},
        },
        "player": "player",
    }
    r = client.post("/trace", json={"scenario": doc, "bundle": [1, 1]})
    assert r.status_code == 200
    assert r.json()["final_price"] == ["4", "3"]


def test_auction_errors_map_to_422(client):
    r = client.post("/simulate", json={"instance": "v_sub", "bundle": [1, 0], "start": ["1", "1"]})
    assert r.status_code == 422
    assert r.json()["detail"]["type"] == "GridTieError"
    r = client.post("/simulate", json={"instance": "v_sub", "bundle": [1, 0], "start": ["1", "1"], "perturb": True})
    assert r.status_code == 200
    assert r.json()["payoff"] == "27999999/4000000"


def test_check(client):
    r = client.post("/check", json={"instance": "v_sub"})
    assert r.json()["substitutes"] is True
