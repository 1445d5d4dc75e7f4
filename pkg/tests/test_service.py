"""End-to-end tests of the labeling service over its HTTP surface."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ifaad.data import make_synthetic_2d, write_canonical
from ifaad.service import create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "datasets", session_dir=tmp_path / "sessions")
    with TestClient(app) as c:
        yield c


def create_session(client, **overrides):
    body = {"dataset_id": "synthetic", "budget": 10, "num_trees": 10, "subsample_size": 64}
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201, resp.text
    return resp.json()


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_create_session_has_pending_query(client):
    snap = create_session(client)
    assert snap["status"] == "active"
    assert snap["iteration"] == 0
    assert snap["pending"]["budget_remaining"] == 10
    assert set(snap["pending"]["features"]) == {"x0", "x1"}
    assert set(snap["feature_medians"]) == {"x0", "x1"}


def test_same_seed_same_first_query(client):
    a = create_session(client, seed=5)
    b = create_session(client, seed=5)
    c = create_session(client, seed=6)
    assert a["pending"]["instance_id"] == b["pending"]["instance_id"]
    assert a["session_id"] != b["session_id"]
    # a different forest seed may or may not change the top instance, but
    # the endpoint must still answer coherently
    assert isinstance(c["pending"]["instance_id"], int)


def test_unknown_dataset_404(client):
    resp = client.post("/sessions", json={"dataset_id": "nope"})
    assert resp.status_code == 404
    body = resp.json()
    assert body["code"] == "not_found"
    assert "message" in body


def test_invalid_tau_is_validation_error(client):
    resp = client.post("/sessions", json={"dataset_id": "synthetic", "tau": 1.5})
    assert resp.status_code == 422
    assert resp.json()["code"] == "validation_error"


def test_budget_above_dataset_size_rejected(client):
    resp = client.post("/sessions", json={"dataset_id": "synthetic", "budget": 100000})
    assert resp.status_code == 400
    assert resp.json()["code"] == "bad_request"


def test_get_next_idempotent_until_label(client):
    snap = create_session(client)
    sid = snap["session_id"]
    first = client.get(f"/sessions/{sid}/next").json()
    second = client.get(f"/sessions/{sid}/next").json()
    assert first == second == snap["pending"]


def test_label_flow_until_exhausted(client):
    snap = create_session(client, budget=3)
    sid = snap["session_id"]
    for i in range(3):
        pending = client.get(f"/sessions/{sid}/next").json()
        resp = client.post(
            f"/sessions/{sid}/label",
            json={"instance_id": pending["instance_id"], "label": "nominal"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["accepted"] is True
        assert body["iteration"] == i + 1
        assert body["curve_point"] == {"iteration": i + 1, "cumulative": 0}
    assert body["status"] == "exhausted"
    assert body["next"] is None
    resp = client.get(f"/sessions/{sid}/next")
    assert resp.status_code == 409
    assert resp.json()["code"] == "budget_exhausted"
    resp = client.post(f"/sessions/{sid}/label", json={"instance_id": 0, "label": "nominal"})
    assert resp.status_code == 409


def test_stale_label_rejected_without_state_change(client):
    snap = create_session(client)
    sid = snap["session_id"]
    pending_id = snap["pending"]["instance_id"]
    wrong = pending_id + 1
    resp = client.post(f"/sessions/{sid}/label", json={"instance_id": wrong, "label": "anomaly"})
    assert resp.status_code == 409
    assert resp.json()["code"] == "stale_instance"
    state = client.get(f"/sessions/{sid}/state").json()
    assert state["iteration"] == 0
    assert state["pending"]["instance_id"] == pending_id
    # double submit of the same accepted instance: second one is stale
    client.post(f"/sessions/{sid}/label", json={"instance_id": pending_id, "label": "anomaly"})
    resp = client.post(f"/sessions/{sid}/label", json={"instance_id": pending_id, "label": "anomaly"})
    assert resp.status_code == 409


def test_invalid_label_string_rejected(client):
    snap = create_session(client)
    sid = snap["session_id"]
    resp = client.post(
        f"/sessions/{sid}/label",
        json={"instance_id": snap["pending"]["instance_id"], "label": "perhaps"},
    )
    assert resp.status_code == 422
    assert resp.json()["code"] == "validation_error"


def test_state_snapshot_tracks_history_and_norm(client):
    snap = create_session(client)
    sid = snap["session_id"]
    for _ in range(3):
        pending = client.get(f"/sessions/{sid}/next").json()
        client.post(
            f"/sessions/{sid}/label",
            json={"instance_id": pending["instance_id"], "label": "anomaly"},
        )
    state = client.get(f"/sessions/{sid}/state").json()
    assert len(state["query_history"]) == 3
    assert len(state["curve"]) == 3
    assert state["anomalies_found"] == 3
    assert state["weight_norm"] == pytest.approx(1.0, abs=1e-9)


def test_unknown_session_404(client):
    resp = client.get("/sessions/deadbeef/state")
    assert resp.status_code == 404


def test_dataset_upload_and_session(client, tmp_path):
    ds = make_synthetic_2d(60, 6, seed=3)
    csv_path = write_canonical(ds, tmp_path / "up.csv")
    resp = client.post("/datasets?name=uploaded", content=csv_path.read_bytes())
    assert resp.status_code == 201
    body = resp.json()
    assert body == {"dataset_id": "uploaded", "total": 66, "dims": 2, "anomaly_count": 6}
    # duplicate name conflicts
    assert client.post("/datasets?name=uploaded", content=csv_path.read_bytes()).status_code == 409
    # bad csv is rejected
    assert client.post("/datasets?name=junk", content=b"not,a\nvalid,csv\n").status_code == 400
    snap = create_session(client, dataset_id="uploaded", budget=5)
    assert snap["dataset_id"] == "uploaded"
    listed = client.get("/datasets").json()["datasets"]
    assert {d["dataset_id"] for d in listed} >= {"synthetic", "uploaded"}


def test_restart_resumes_to_same_pending_query(tmp_path):
    data_dir = tmp_path / "datasets"
    session_dir = tmp_path / "sessions"
    with TestClient(create_app(data_dir=data_dir, session_dir=session_dir)) as client:
        snap = create_session(client, budget=8, seed=2)
        sid = snap["session_id"]
        for _ in range(4):
            pending = client.get(f"/sessions/{sid}/next").json()
            client.post(
                f"/sessions/{sid}/label",
                json={"instance_id": pending["instance_id"], "label": "nominal"},
            )
        before = client.get(f"/sessions/{sid}/next").json()
        state_before = client.get(f"/sessions/{sid}/state").json()

    # a fresh process over the same directories
    with TestClient(create_app(data_dir=data_dir, session_dir=session_dir)) as client2:
        after = client2.get(f"/sessions/{sid}/next").json()
        state_after = client2.get(f"/sessions/{sid}/state").json()
        assert after == before
        assert state_after["iteration"] == state_before["iteration"] == 4
        assert state_after["query_history"] == state_before["query_history"]
        # and the resumed session still accepts labels
        resp = client2.post(
            f"/sessions/{sid}/label",
            json={"instance_id": after["instance_id"], "label": "anomaly"},
        )
        assert resp.status_code == 200
        assert resp.json()["iteration"] == 5


def test_concurrent_sessions_do_not_share_weights(client):
    a = create_session(client, budget=5, seed=1)
    b = create_session(client, budget=5, seed=1)
    sid_a, sid_b = a["session_id"], b["session_id"]
    pending_a = client.get(f"/sessions/{sid_a}/next").json()
    client.post(
        f"/sessions/{sid_a}/label",
        json={"instance_id": pending_a["instance_id"], "label": "anomaly"},
    )
    assert client.get(f"/sessions/{sid_a}/state").json()["iteration"] == 1
    assert client.get(f"/sessions/{sid_b}/state").json()["iteration"] == 0
