"""HTTP session API: lifecycle, error paths, and the human-oracle
transparency guarantee (a human replaying ground truth reproduces the
simulated-oracle run bit for bit)."""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from imboost import (SimulatedOracle, SyntheticSpec, TrainerConfig,
                     make_synthetic, run_session, split_and_normalize)
from imboost.service import create_app

TINY_CONFIG = {"n0": 16, "T0": 2, "T1": 6, "T2": 10, "Ta": 2, "score_mc": 4, "seed": 0}
TINY_SYNTH = {"n": 240}


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def create_session(client, config=None, synthetic=None):
    body = {"synthetic": synthetic or dict(TINY_SYNTH),
            "config": config or dict(TINY_CONFIG)}
    response = client.post("/v1/sessions", json=body)
    assert response.status_code == 201
    return response.json()["id"]


def wait_for_phase(client, sid, phases, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = client.get(f"/v1/sessions/{sid}").json()
        if state["phase"] in phases:
            return state
        time.sleep(0.02)
    raise AssertionError(f"timed out waiting for {phases}; last state {state}")


def ground_truth_answers(queries, labels, train_idx):
    answers = []
    for q in queries:
        row = train_idx[q["index"]]
        answers.append({"index": q["index"],
                        "label": "outlier" if labels[row] else "inlier"})
    return answers


def dataset_like_service(seed=0, n=240):
    raw = make_synthetic(SyntheticSpec(n=n, seed=seed))
    return split_and_normalize(raw, seed=seed)


def drive_session(client, sid, answer_fn):
    """Answer every query round until the session finishes."""
    while True:
        state = wait_for_phase(client, sid, ("AWAITING_LABELS", "DONE", "FAILED"))
        if state["phase"] != "AWAITING_LABELS":
            return state
        response = client.get(f"/v1/sessions/{sid}/queries")
        if response.status_code == 404 or not response.json()["queries"]:
            time.sleep(0.02)  # previous round not yet consumed by the trainer
            continue
        queries = response.json()["queries"]
        response = client.post(f"/v1/sessions/{sid}/labels",
                               json={"labels": answer_fn(queries)})
        assert response.status_code == 200


# -- lifecycle ------------------------------------------------------------------

def test_create_and_initial_state(client):
    sid = create_session(client)
    state = client.get(f"/v1/sessions/{sid}").json()
    assert state["phase"] in ("WARMUP", "POLARIZING", "AWAITING_LABELS")
    assert state["rounds_total"] == 2
    assert state["id"] == sid


def test_full_session_reaches_done_and_matches_simulated(client):
    ds = dataset_like_service()
    labels = ds.labels

    sid = create_session(client)
    state = wait_for_phase(client, sid, ("AWAITING_LABELS",))
    assert state["round"] == 0
    assert len(state["pending"]) > 0
    assert state["loss_histogram"] is not None
    assert state["loss_histogram"]["tau"] is not None

    final = drive_session(
        client, sid, lambda qs: ground_truth_answers(qs, labels, ds.train_idx))
    assert final["phase"] == "DONE"
    assert len(final["per_round_metrics"]) == 2

    served = client.get(f"/v1/sessions/{sid}/scores").json()
    reference = run_session(dataset_like_service(), TrainerConfig(**TINY_CONFIG),
                            oracle=SimulatedOracle(labels[ds.train_idx]))
    expected = {int(i): s for i, s in zip(ds.test_idx, reference.test_scores())}
    got = {r["row_index"]: r["score"] for r in served["scores"] if r["split"] == "test"}
    assert set(got) == set(expected)
    for i in expected:
        assert got[i] == expected[i]  # bit-identical oracle transparency
    assert 0.0 <= served["metrics"]["auc_test"] <= 1.0


def test_queries_payload_fields(client):
    sid = create_session(client)
    wait_for_phase(client, sid, ("AWAITING_LABELS",))
    payload = client.get(f"/v1/sessions/{sid}/queries").json()
    assert payload["round"] == 1
    for q in payload["queries"]:
        assert set(q) == {"index", "row_index", "features", "features_normalized",
                          "ensemble_loss", "posterior_inlier"}
        assert len(q["features"]) == 2
        assert 0.0 <= q["posterior_inlier"] <= 1.0


def test_partial_labels_keep_awaiting(client):
    sid = create_session(client)
    wait_for_phase(client, sid, ("AWAITING_LABELS",))
    queries = client.get(f"/v1/sessions/{sid}/queries").json()["queries"]
    first = queries[0]["index"]
    response = client.post(f"/v1/sessions/{sid}/labels",
                           json={"labels": [{"index": first, "label": "inlier"}]})
    assert response.status_code == 200
    assert response.json()["remaining"] == len(queries) - 1
    state = client.get(f"/v1/sessions/{sid}").json()
    assert state["phase"] == "AWAITING_LABELS"
    # answered index no longer listed as queryable
    remaining = client.get(f"/v1/sessions/{sid}/queries").json()["queries"]
    assert first not in [q["index"] for q in remaining]


def test_skip_label_accepted(client):
    sid = create_session(client)
    wait_for_phase(client, sid, ("AWAITING_LABELS",))
    queries = client.get(f"/v1/sessions/{sid}/queries").json()["queries"]
    response = client.post(f"/v1/sessions/{sid}/labels",
                           json={"labels": [{"index": queries[0]["index"],
                                             "label": "skip"}]})
    assert response.status_code == 200


# -- error paths -----------------------------------------------------------------

def test_unknown_session_is_404(client):
    assert client.get("/v1/sessions/nope").status_code == 404
    assert client.get("/v1/sessions/nope/queries").status_code == 404
    assert client.get("/v1/sessions/nope/scores").status_code == 404
    assert client.post("/v1/sessions/nope/labels",
                       json={"labels": [{"index": 0, "label": "inlier"}]}).status_code == 404


def test_queries_404_when_none_pending(client):
    sid = create_session(client, config={**TINY_CONFIG, "budget_override": 0})
    wait_for_phase(client, sid, ("DONE",))
    assert client.get(f"/v1/sessions/{sid}/queries").status_code == 404


def test_label_conflicts_are_409_and_atomic(client):
    sid = create_session(client)
    wait_for_phase(client, sid, ("AWAITING_LABELS",))
    queries = client.get(f"/v1/sessions/{sid}/queries").json()["queries"]
    indices = [q["index"] for q in queries]
    unqueried = max(indices) + 1

    before = client.get(f"/v1/sessions/{sid}").json()
    # non-pending index rejects the whole batch
    response = client.post(f"/v1/sessions/{sid}/labels", json={"labels": [
        {"index": indices[0], "label": "inlier"},
        {"index": unqueried, "label": "outlier"}]})
    assert response.status_code == 409
    after = client.get(f"/v1/sessions/{sid}").json()
    assert after["answered"] == before["answered"] == []

    # duplicate within one request
    response = client.post(f"/v1/sessions/{sid}/labels", json={"labels": [
        {"index": indices[0], "label": "inlier"},
        {"index": indices[0], "label": "outlier"}]})
    assert response.status_code == 409

    # already-answered index
    ok = client.post(f"/v1/sessions/{sid}/labels",
                     json={"labels": [{"index": indices[0], "label": "inlier"}]})
    assert ok.status_code == 200
    response = client.post(f"/v1/sessions/{sid}/labels",
                           json={"labels": [{"index": indices[0], "label": "outlier"}]})
    assert response.status_code == 409


def test_malformed_bodies_are_400(client):
    sid = create_session(client)
    wait_for_phase(client, sid, ("AWAITING_LABELS",))
    url = f"/v1/sessions/{sid}/labels"
    assert client.post(url, content=b"not json",
                       headers={"content-type": "application/json"}).status_code == 400
    assert client.post(url, json={}).status_code == 400
    assert client.post(url, json={"labels": []}).status_code == 400
    assert client.post(url, json={"labels": [{"index": "x", "label": "inlier"}]}).status_code == 400
    assert client.post(url, json={"labels": [{"index": 0, "label": "maybe"}]}).status_code == 400


def test_create_session_validation(client):
    assert client.post("/v1/sessions", json={}).status_code == 400
    assert client.post("/v1/sessions", json={"synthetic": {}, "csv": "a\n1\n"}).status_code == 400
    assert client.post("/v1/sessions",
                       json={"synthetic": {"n": 240},
                             "config": {"Ta": 3, "T2": 10}}).status_code == 400


def test_csv_upload_session(client):
    ds = make_synthetic(SyntheticSpec(n=160, seed=1))
    lines = ["f0,f1,y"]
    for row, label in zip(ds.features, ds.labels):
        lines.append(f"{float(row[0])!r},{float(row[1])!r},{int(label)}")
    body = {"csv": "\n".join(lines) + "\n", "label_column": "y",
            "config": dict(TINY_CONFIG)}
    response = client.post("/v1/sessions", json=body)
    assert response.status_code == 201
    sid = response.json()["id"]
    state = wait_for_phase(client, sid, ("AWAITING_LABELS", "DONE"))
    assert state["n_train"] == 112
