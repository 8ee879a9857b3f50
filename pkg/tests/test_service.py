"""HTTP endpoints: contracts, error mapping, parity with direct calls."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from icpnav import __version__
from icpnav.persist import replay_metrics
from icpnav.service.app import create_app, handle_run
from icpnav.service.schemas import RunRequest
from icpnav.suite import RunConfig

SMALL = dict(method="orca", humans=2, cases=2, seed=1, workers=1)


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestHealth:
    def test_ok(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "version": __version__}


class TestSuitesRun:
    def test_small_suite(self, client, tmp_path):
        body = dict(SMALL, out=str(tmp_path))
        resp = client.post("/suites/run", json=body)
        assert resp.status_code == 200
        data = resp.json()
        assert data["summary"]["case_count"] == 2
        assert 0.0 <= data["summary"]["success_rate"] <= 1.0
        assert data["summary"]["cr"] is None
        assert len(data["episodes"]) == 2
        assert data["episodes"][0]["case"] == 0
        assert data["out"] == str(tmp_path)
        assert (tmp_path / "summary.csv").exists()
        assert (tmp_path / "replay_case0000.jsonl").exists()

    def test_matches_direct_handler(self, client):
        req = RunRequest(**SMALL)
        direct = handle_run(req)
        resp = client.post("/suites/run", json=req.model_dump())
        assert resp.json() == json.loads(direct.model_dump_json())

    def test_bad_method_is_422(self, client):
        resp = client.post("/suites/run", json=dict(SMALL, method="magic"))
        assert resp.status_code == 422
        assert "unknown method" in resp.json()["detail"]

    def test_defaults_fill_in(self, client):
        # Empty body is a fully defaulted run request; only validate the
        # schema, not a 100-case run.
        req = RunRequest()
        assert req.to_config() == RunConfig()


class TestMetricsReplay:
    def test_from_content_and_from_path(self, client, tmp_path):
        client.post("/suites/run", json=dict(SMALL, out=str(tmp_path)))
        path = tmp_path / "replay_case0000.jsonl"
        expected = replay_metrics(path)

        by_path = client.post("/metrics/replay", json={"path": str(path)})
        assert by_path.status_code == 200
        body = by_path.json()
        assert body["outcome"] == expected.outcome.value
        assert body["nt"] == expected.nt
        assert body["pl"] == expected.pl
        assert body["itr"] == expected.itr
        assert body["cr"] == expected.cr

        by_content = client.post(
            "/metrics/replay", json={"content": path.read_text()}
        )
        assert by_content.json() == body

    def test_missing_input_is_422(self, client):
        resp = client.post("/metrics/replay", json={})
        assert resp.status_code == 422

    def test_absent_file_is_404(self, client):
        resp = client.post("/metrics/replay", json={"path": "/nope/missing.jsonl"})
        assert resp.status_code == 404

    def test_corrupt_content_is_422(self, client):
        resp = client.post("/metrics/replay", json={"content": "{}"})
        assert resp.status_code == 422


class TestCalibrationOffcp:
    def test_calibrate_and_write(self, client, tmp_path):
        out = tmp_path / "radii.json"
        body = {
            "config": dict(humans=3, seed=7, offcp_episodes=7),
            "out": str(out),
        }
        resp = client.post("/calibration/offcp", json=body)
        assert resp.status_code == 200
        data = resp.json()
        assert len(data["radii"]) == 5
        assert data["alpha"] == 0.05
        assert data["sample_count"] == 21
        assert data["episodes"] == 7
        assert out.exists()
        from icpnav.persist import load_radii

        loaded = load_radii(out)
        assert [float(x) for x in loaded.radii.radii] == data["radii"]

    def test_insufficient_budget_is_422(self, client):
        body = {"config": dict(humans=2, offcp_episodes=2)}
        resp = client.post("/calibration/offcp", json=body)
        assert resp.status_code == 422
        assert "calibration samples" in resp.json()["detail"]


class TestScenariosGenerate:
    def test_layouts(self, client):
        body = dict(humans=4, count=3, seed=5, geometry="circle")
        resp = client.post("/scenarios/generate", json=body)
        assert resp.status_code == 200
        scs = resp.json()["scenarios"]
        assert len(scs) == 3
        for sc in scs:
            assert len(sc["human_starts"]) == 4
            assert len(sc["robot_start"]) == 2
            assert sc["seed"] == 5
        again = client.post("/scenarios/generate", json=body)
        assert again.json() == resp.json()

    def test_bad_geometry_is_422(self, client):
        resp = client.post(
            "/scenarios/generate", json=dict(humans=2, count=1, seed=0, geometry="hex")
        )
        assert resp.status_code == 422
