"""HTTP service tests: run lifecycle, validation codes, dataset
handling, determinism across requests, and restart recovery."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from transferopt.service import create_app

PLAN_CONFIG = {
    "focal_club": "FOC",
    "lambda": [0.45, 0.45, 0.1],
    "solver": {"method": "GA", "population": 30, "max_iterations": 40,
               "stall_limit": 15, "seed": 0},
}


def wait_done(client, run_id, timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/api/runs/{run_id}").json()
        if doc["status"] in ("done", "failed"):
            return doc
        time.sleep(0.05)
    raise AssertionError(f"run {run_id} did not finish")


@pytest.fixture()
def client(tmp_path):
    with TestClient(create_app(tmp_path)) as c:
        yield c


class TestPlans:
    def test_lifecycle(self, client):
        r = client.post("/api/plans", json={"config": PLAN_CONFIG})
        assert r.status_code == 202
        run_id = r.json()["run_id"]
        doc = wait_done(client, run_id)
        assert doc["status"] == "done"
        plan = doc["result"]
        assert plan["feasible"] is True
        assert plan["buys"] and "expected_fee" in plan["buys"][0]

    def test_unknown_dataset_404(self, client):
        r = client.post(
            "/api/plans", json={"dataset": "nope", "config": PLAN_CONFIG}
        )
        assert r.status_code == 404

    def test_bad_scenario_400(self, client):
        bad = dict(PLAN_CONFIG, **{"lambda": [-1.0, 1.0, 1.0]})
        r = client.post("/api/plans", json={"config": bad})
        assert r.status_code == 400

    def test_deterministic_across_requests(self, client):
        ids = [
            client.post("/api/plans", json={"config": PLAN_CONFIG}).json()["run_id"]
            for _ in range(2)
        ]
        docs = [wait_done(client, i) for i in ids]
        assert docs[0]["result"] == docs[1]["result"]


class TestAuctions:
    def test_single_round_fixture(self, client):
        r = client.post(
            "/api/auctions",
            json={"fixture": "almiron", "n_sim": 300, "rounds": 1, "seed": 42},
        )
        assert r.status_code == 202
        doc = wait_done(client, r.json()["run_id"])
        assert doc["status"] == "done"
        stats = doc["result"]
        assert 0.0 < stats["sale_probability"] < 1.0
        assert len(stats["rounds"]) == 1

    def test_inline_setup(self, client):
        setup = json.loads(
            (__import__("pathlib").Path(__file__).parent.parent
             / "src/transferopt/fixtures/auction_almiron.json").read_text()
        )
        r = client.post(
            "/api/auctions", json={"setup": setup, "n_sim": 100, "rounds": 1}
        )
        doc = wait_done(client, r.json()["run_id"])
        assert doc["status"] == "done"

    def test_zero_rounds_400(self, client):
        r = client.post("/api/auctions", json={"fixture": "almiron", "rounds": 0})
        assert r.status_code == 400

    def test_missing_setup_400(self, client):
        r = client.post("/api/auctions", json={"n_sim": 10})
        assert r.status_code == 400


class TestRunsAndDatasets:
    def test_unknown_run_404(self, client):
        assert client.get("/api/runs/does-not-exist").status_code == 404

    def test_list_datasets(self, client):
        listing = client.get("/api/datasets").json()
        assert "synthetic-league" in listing["bundled"]
        assert "almiron" in listing["auction_fixtures"]

    def test_upload_roundtrip(self, client, fixtures_dir):
        csv_text = (fixtures_dir / "players.csv").read_text()
        r = client.post(
            "/api/datasets", params={"name": "uploaded"}, content=csv_text
        )
        assert r.status_code == 201
        assert "uploaded" in client.get("/api/datasets").json()["uploaded"]
        run = client.post(
            "/api/plans", json={"dataset": "uploaded", "config": PLAN_CONFIG}
        )
        assert wait_done(client, run.json()["run_id"])["status"] == "done"

    def test_empty_upload_400(self, client):
        assert client.post(
            "/api/datasets", params={"name": "empty"}, content=""
        ).status_code == 400


class TestPersistence:
    def test_restart_marks_interrupted_runs_failed(self, tmp_path):
        with TestClient(create_app(tmp_path)) as c:
            r = c.post("/api/plans", json={"config": PLAN_CONFIG})
            run_id = r.json()["run_id"]
            wait_done(c, run_id)
        # tamper the persisted doc back to "running" to model a crash
        doc_path = tmp_path / "runs" / f"{run_id}.json"
        doc = json.loads(doc_path.read_text())
        done_result = doc["result"]
        doc["status"] = "running"
        doc["result"] = None
        doc_path.write_text(json.dumps(doc))
        with TestClient(create_app(tmp_path)) as c:
            fresh = c.get(f"/api/runs/{run_id}").json()
            assert fresh["status"] == "failed"
            assert "restart" in fresh["error"]

    def test_completed_runs_survive_restart(self, tmp_path):
        with TestClient(create_app(tmp_path)) as c:
            r = c.post("/api/plans", json={"config": PLAN_CONFIG})
            run_id = r.json()["run_id"]
            result = wait_done(c, run_id)["result"]
        with TestClient(create_app(tmp_path)) as c:
            doc = c.get(f"/api/runs/{run_id}").json()
            assert doc["status"] == "done"
            assert doc["result"] == result
