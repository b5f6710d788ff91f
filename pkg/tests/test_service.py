from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from trackscreen import synth
from trackscreen.service import ServiceConfig, create_app
from trackscreen.store import Store, ingest_dataset

EVENT = "100m-men"


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("svc")
    ds = synth.generate(synth.GeneratorSpec(n_athletes=60, seed=3, fraction_doped=0.15, n_sanctioned=4))
    store = Store(tmp / "svc.db")
    ingest_dataset(store, ds.records, ds.competitions.values(), [], ds.sanctions)
    app = create_app(store, ServiceConfig())
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
    store.close()


def wait_for_run(client, run_id: str, timeout: float = 30.0) -> dict:
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/api/runs/{run_id}").json()
        if status["status"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise TimeoutError("run did not finish")


@pytest.fixture(scope="module")
def materialized(client):
    r = client.post("/api/detect", json={
        "slice": {"event_code": EVENT},
        "methods": ["zscore", "iqr", "iforest", "excess_performance"],
    })
    assert r.status_code == 202
    status = wait_for_run(client, r.json()["run_id"])
    assert status["status"] == "done", status
    return status


class TestReadEndpoints:
    def test_methods_lists_eight(self, client):
        body = client.get("/api/methods").json()
        assert len(body) == 8
        assert {"method_id", "category", "complexity_note"} <= set(body[0])

    def test_methods_payload_stable(self, client):
        a = client.get("/api/methods").content
        b = client.get("/api/methods").content
        assert a == b

    def test_slices_lists_ingested_event(self, client):
        slices = client.get("/api/slices").json()
        assert [s["event_code"] for s in slices] == [EVENT]
        assert {"event_code", "date_from", "date_to", "athletes", "performances"} == set(slices[0])

    def test_empty_store_slices(self, tmp_path):
        store = Store(tmp_path / "empty.db")
        with TestClient(create_app(store, ServiceConfig())) as c:
            assert c.get("/api/slices").json() == []
        store.close()


class TestDetectRuns:
    def test_status_transitions(self, client):
        r = client.post("/api/detect", json={"slice": {"event_code": EVENT}, "methods": ["mad"]})
        body = r.json()
        assert r.status_code == 202
        assert body["status"] in ("queued", "running", "done")
        status = wait_for_run(client, body["run_id"])
        assert status["status"] == "done"
        assert status["method_status"]["mad"]["status"] == "done"
        assert status["method_status"]["mad"]["wall_time_ms"] > 0

    def test_duplicate_payload_same_run_id(self, client):
        payload = {"slice": {"event_code": EVENT}, "methods": ["zscore", "iqr"]}
        first = client.post("/api/detect", json=payload).json()["run_id"]
        second = client.post("/api/detect", json=payload).json()["run_id"]
        assert first == second

    def test_unknown_slice_404(self, client):
        r = client.post("/api/detect", json={"slice": {"event_code": "800m-men"}, "methods": ["zscore"]})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_slice"

    def test_bad_config_422(self, client):
        r = client.post("/api/detect", json={"slice": {"event_code": EVENT}, "config": {"nope": 3}})
        assert r.status_code == 422
        assert r.json()["error"]["code"] == "bad_config"

    def test_unknown_run_404(self, client):
        r = client.get("/api/runs/doesnotexist")
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_run"


class TestScreen:
    def test_requires_materialization(self, client):
        r = client.get("/api/screen", params={"event_code": EVENT, "method": "copula"})
        assert r.status_code == 409
        body = r.json()["error"]
        assert body["code"] == "not_materialized"
        assert "detect" in body["hint"]

    def test_screen_page_shape(self, client, materialized):
        r = client.get("/api/screen", params={"event_code": EVENT, "method": "iforest"})
        assert r.status_code == 200
        page = r.json()
        assert {"slice", "method_id", "rows", "next_cursor", "total_flagged"} == set(page)
        assert page["rows"]
        assert {"athlete_id", "best_score", "rank_value", "flag_count", "explanation", "agreement"} == set(page["rows"][0])

    def test_warm_screen_byte_identical(self, client, materialized):
        a = client.get("/api/screen", params={"event_code": EVENT, "method": "iforest"})
        b = client.get("/api/screen", params={"event_code": EVENT, "method": "iforest"})
        assert a.content == b.content

    def test_athlete_view_matches_screen_flags(self, client, materialized):
        page = client.get("/api/screen", params={"event_code": EVENT, "method": "iforest"}).json()
        row = page["rows"][0]
        view = client.get(f"/api/athletes/{row['athlete_id']}", params={"event_code": EVENT}).json()
        flagged_count = sum(1 for pt in view["trajectory"] if pt["methods"]["iforest"]["flagged"])
        assert flagged_count == row["flag_count"]

    def test_unknown_athlete_404(self, client, materialized):
        r = client.get("/api/athletes/NOPE", params={"event_code": EVENT})
        assert r.status_code == 404
        assert r.json()["error"]["code"] == "unknown_athlete"


class TestConsensusEndpoint:
    def test_min_methods_filter(self, client, materialized):
        loose = client.get("/api/consensus", params={"event_code": EVENT, "min_methods": 2}).json()
        strict = client.get("/api/consensus", params={"event_code": EVENT, "min_methods": 3}).json()
        assert all(e["method_count"] >= 2 for e in loose["entries"])
        assert all(e["method_count"] >= 3 for e in strict["entries"])
        assert len(strict["entries"]) <= len(loose["entries"])

    def test_sanctioned_only_filter(self, client, materialized):
        body = client.get("/api/consensus", params={
            "event_code": EVENT, "min_methods": 1, "sanctioned_only": True,
        }).json()
        assert all(e["is_sanctioned"] for e in body["entries"])

    def test_consensus_board_agreement_matches_screen_badges(self, client, materialized):
        cons = client.get("/api/consensus", params={"event_code": EVENT, "min_methods": 1}).json()
        counts = {e["athlete_id"]: e["method_count"] for e in cons["entries"]}
        page = client.get("/api/screen", params={"event_code": EVENT, "method": "iforest"}).json()
        for row in page["rows"]:
            assert counts[row["athlete_id"]] == row["agreement"]


class TestEvaluateEndpoint:
    def test_report_shape(self, client, materialized):
        body = client.get("/api/evaluate", params={"event_code": EVENT}).json()
        assert {"slice", "sanctioned_count", "methods"} == set(body)
        m = body["methods"]["iforest"]
        assert {"method_id", "true_positives", "false_positives", "flagged_athletes",
                "precision", "recall", "f1", "precision_at_k", "wall_time_ms"} == set(m)
        assert m["true_positives"] + m["false_positives"] == m["flagged_athletes"]

    def test_identical_gets_between_mutations(self, client, materialized):
        a = client.get("/api/evaluate", params={"event_code": EVENT})
        b = client.get("/api/evaluate", params={"event_code": EVENT})
        assert a.content == b.content
