import json

import pytest
from fastapi.testclient import TestClient

from ilcbox import GridParams, Session, SessionConfig, load_wbc, replay_session
from ilcbox.projection import wbc_default_spec
from ilcbox.service import create_app
from ilcbox.session import SessionError


WBC_GRID = GridParams(cell_width=0.5, cell_height=0.5, max_span_w=24, max_span_h=8,
                      coverage_fraction=0.1, purity_threshold=1.0)


@pytest.fixture(scope="module")
def wbc_session_config():
    return SessionConfig(dataset_name="wbc", spec=wbc_default_spec(), grid=WBC_GRID)


@pytest.fixture()
def session(wbc, wbc_session_config):
    return Session(wbc, wbc_session_config)


def test_candidates_then_accept_drops_remaining(session):
    total = len(session.polylines)
    ranked = session.candidates(top_k=3)
    assert any(ranked.values())
    cls, rows = next((c, r) for c, r in ranked.items() if r)
    top = rows[0]
    session.accept(tuple(top["corners"]), cls)
    assert len(session.remaining) == total - sum(top["counts"].values())
    assert session.ruleset.rules[0].predicted_class == cls


def test_undo_restores_previous_state(session):
    session.candidates(top_k=1)
    before_digest = session.digest()
    before_remaining = list(session.remaining)
    ranked = session.candidates(top_k=1)
    cls, rows = next((c, r) for c, r in ranked.items() if r)
    session.accept(tuple(rows[0]["corners"]), cls)
    assert session.remaining != before_remaining
    session.undo()
    assert session.remaining == before_remaining
    assert session.ruleset is None
    assert session.digest() != before_digest  # the log grew even though state reverted


def test_accept_empty_box_rejected(session):
    with pytest.raises(SessionError):
        session.accept((1000.0, 1001.0, 1000.0, 1001.0))


def test_replay_yields_byte_identical_rule_file(wbc, wbc_session_config):
    session = Session(wbc, wbc_session_config)
    for _ in range(3):
        ranked = session.candidates(top_k=1)
        picked = next(((c, r[0]) for c, r in ranked.items() if r), None)
        if picked is None:
            break
        cls, row = picked
        session.accept(tuple(row["corners"]), cls)
    session.undo()
    ranked = session.candidates(top_k=2)
    cls, rows = next((c, r) for c, r in ranked.items() if r)
    session.accept(tuple(rows[-1]["corners"]), cls)
    session.prune(min_cases=5, mode="refuse")
    session.join()
    assert len(session.actions) >= 6
    exported = session.export_rules()

    replayed = replay_session(wbc, wbc_session_config, session.action_log())
    assert replayed.export_rules() == exported
    assert replayed.remaining == session.remaining


def test_action_log_persisted(tmp_path, wbc, wbc_session_config):
    log_path = tmp_path / "actions.jsonl"
    session = Session(wbc, wbc_session_config, log_path=log_path)
    ranked = session.candidates(top_k=1)
    cls, rows = next((c, r) for c, r in ranked.items() if r)
    session.accept(tuple(rows[0]["corners"]), cls)
    session.undo()
    lines = [json.loads(l) for l in log_path.read_text().splitlines()]
    assert [l["action"] for l in lines] == ["accept", "undo"]


# -- HTTP API ------------------------------------------------------------------


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def make_session(client, **overrides):
    body = {"dataset": "wbc", "mode": "ilc2_partial_dynamic",
            "cell_width": 0.5, "cell_height": 0.5,
            "coverage_fraction": 0.1, "purity_threshold": 1.0}
    body.update(overrides)
    response = client.post("/api/v1/sessions", json=body)
    assert response.status_code == 200
    return response.json()


def test_http_create_and_get(client):
    created = make_session(client)
    sid = created["id"]
    assert created["total_cases"] == 683
    assert created["remaining"] == 683
    got = client.get(f"/api/v1/sessions/{sid}").json()
    assert got["digest"] == created["digest"]


def test_http_projection_decimation(client):
    sid = make_session(client)["id"]
    full = client.get(f"/api/v1/sessions/{sid}/projection").json()
    assert full["count"] == 683 and len(full["polylines"]) == 683
    thin = client.get(f"/api/v1/sessions/{sid}/projection", params={"decimate": 100}).json()
    assert thin["decimated"] and len(thin["polylines"]) < 683
    # decimation is display-only: coordinates it does return are exact
    assert thin["polylines"][0]["nodes"] == full["polylines"][0]["nodes"]


def test_http_accept_undo_flow(client):
    created = make_session(client)
    sid = created["id"]
    cands = client.get(f"/api/v1/sessions/{sid}/candidates", params={"top_k": 1}).json()
    cls, rows = next((c, r) for c, r in cands["candidates"].items() if r)
    top = rows[0]
    accepted = client.post(f"/api/v1/sessions/{sid}/accept",
                           json={"digest": cands["digest"], "corners": top["corners"],
                                 "predicted_class": cls}).json()
    assert accepted["remaining"] == 683 - sum(top["counts"].values())
    assert accepted["rules"]
    # server is the source of truth for the remaining count arithmetic
    expected_remaining_counts = accepted["remaining_counts"]
    assert sum(expected_remaining_counts.values()) == accepted["remaining"]
    undone = client.post(f"/api/v1/sessions/{sid}/undo",
                         json={"digest": accepted["digest"]}).json()
    assert undone["remaining"] == 683


def test_http_stale_digest_conflict(client):
    sid = make_session(client)["id"]
    response = client.post(f"/api/v1/sessions/{sid}/accept",
                           json={"digest": "bogus", "corners": [0, 1, 0, 1]})
    assert response.status_code == 409


def test_http_invalid_box_rejected(client):
    created = make_session(client)
    sid = created["id"]
    response = client.post(f"/api/v1/sessions/{sid}/accept",
                           json={"digest": created["digest"],
                                 "corners": [5000, 5001, 5000, 5001]})
    assert response.status_code == 400


def test_http_prune_join_rules_and_evaluate(client):
    created = make_session(client)
    sid = created["id"]
    digest = created["digest"]
    for _ in range(2):
        cands = client.get(f"/api/v1/sessions/{sid}/candidates", params={"top_k": 1}).json()
        picked = next(((c, r[0]) for c, r in cands["candidates"].items() if r), None)
        if picked is None:
            break
        cls, top = picked
        out = client.post(f"/api/v1/sessions/{sid}/accept",
                          json={"digest": cands["digest"], "corners": top["corners"],
                                "predicted_class": cls}).json()
        digest = out["digest"]
    pruned = client.post(f"/api/v1/sessions/{sid}/prune",
                         json={"digest": digest, "min_cases": 1, "mode": "refuse"})
    assert pruned.status_code == 200
    digest = pruned.json()["digest"]
    joined = client.post(f"/api/v1/sessions/{sid}/join", json={"digest": digest})
    assert joined.status_code == 200
    rules = client.get(f"/api/v1/sessions/{sid}/rules").json()
    assert rules["rules_file"]
    evaluated = client.post(f"/api/v1/sessions/{sid}/evaluate").json()
    assert evaluated["total"] == 683
    assert evaluated["rules"]


def test_http_explain_round_trip(client):
    created = make_session(client)
    sid = created["id"]
    cands = client.get(f"/api/v1/sessions/{sid}/candidates", params={"top_k": 1}).json()
    cls, rows = next((c, r) for c, r in cands["candidates"].items() if r)
    client.post(f"/api/v1/sessions/{sid}/accept",
                json={"digest": cands["digest"], "corners": rows[0]["corners"],
                      "predicted_class": cls})
    response = client.post(f"/api/v1/sessions/{sid}/explain",
                           json={"point": [5, 1, 1, 1, 2, 1, 3, 1, 1],
                                 "purity_threshold": 0.95,
                                 "initial_resolution": 1.0,
                                 "decrement": 0.25, "min_resolution": 0.5})
    assert response.status_code == 200
    payload = response.json()["explanation"]
    assert payload["verdict"] in ("explained", "no_box_found")


def test_http_unknown_session_404(client):
    assert client.get("/api/v1/sessions/nope").status_code == 404


def test_http_unknown_dataset_400(client):
    response = client.post("/api/v1/sessions", json={"dataset": "mystery"})
    assert response.status_code == 400
