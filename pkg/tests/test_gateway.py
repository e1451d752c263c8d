import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient
from hypothesis import given, settings
from hypothesis import strategies as st

from protlab.gateway import SessionManager, create_app

FIXTURES = Path(__file__).parent.parent / "fixtures"


def make_client(tmp_path, fixture="case_study_1"):
    manager = SessionManager(tmp_path / "data", fixtures_dir=FIXTURES / fixture)
    return TestClient(create_app(manager)), manager


def start_and_wait(client, manager, objective="run the scripted study"):
    resp = client.post("/sessions", json={"objective": objective})
    assert resp.status_code == 201
    session_id = resp.json()["session_id"]
    manager.wait(session_id)
    return session_id


def read_stream(client, session_id, last_event_id=None, max_events=None):
    headers = {}
    if last_event_id is not None:
        headers["last-event-id"] = str(last_event_id)
    events = []
    with client.stream("GET", f"/sessions/{session_id}/events", headers=headers) as resp:
        assert resp.status_code == 200
        for line in resp.iter_lines():
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: ") :]))
                if max_events is not None and len(events) >= max_events:
                    break
    return events


def test_create_session_returns_handle(tmp_path):
    client, manager = make_client(tmp_path)
    resp = client.post("/sessions", json={"objective": "evaluate the enzyme"})
    assert resp.status_code == 201
    body = resp.json()
    assert body["session_id"] and body["objective"] == "evaluate the enzyme"
    manager.wait(body["session_id"])


def test_create_session_rejects_empty_objective(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.post("/sessions", json={"objective": "  "}).status_code == 400


def test_two_creations_distinct_ids(tmp_path):
    client, manager = make_client(tmp_path)
    a = client.post("/sessions", json={"objective": "first"}).json()["session_id"]
    b = client.post("/sessions", json={"objective": "second"}).json()["session_id"]
    assert a != b
    manager.wait(a), manager.wait(b)


def test_idempotency_key_returns_same_session(tmp_path):
    client, manager = make_client(tmp_path)
    headers = {"idempotency-key": "abc"}
    a = client.post("/sessions", json={"objective": "x"}, headers=headers).json()
    b = client.post("/sessions", json={"objective": "x"}, headers=headers).json()
    assert a["session_id"] == b["session_id"]
    manager.wait(a["session_id"])


def test_stream_full_replay_gapless(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)
    events = read_stream(client, session_id)
    assert events, "completed session streams its full record"
    assert [e["seq"] for e in events] == list(range(len(events)))
    kinds = {e["kind"] for e in events}
    assert {"phase_change", "tool_invocation", "tool_result", "report"} <= kinds


def test_stream_reconnect_with_last_event_id(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)
    full = read_stream(client, session_id)
    cut = len(full) // 2
    resumed = read_stream(client, session_id, last_event_id=full[cut]["seq"])
    assert [e["seq"] for e in resumed] == list(range(cut + 1, len(full)))


def test_stream_unknown_session_404(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.get("/sessions/nope/events").status_code == 404


@settings(max_examples=12, deadline=None)
@given(data=st.data())
def test_reconnect_property_no_dup_no_drop(tmp_path_factory, data):
    """Injected disconnects at arbitrary points never duplicate or drop."""
    tmp_path = tmp_path_factory.mktemp("gw")
    client, manager = make_client(tmp_path, fixture="case_study_2")
    session_id = start_and_wait(client, manager)
    full = read_stream(client, session_id)
    n = len(full)
    cuts = sorted(data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=4, unique=True)))
    collected = []
    cursor = -1
    for cut in cuts + [n - 1]:
        chunk = read_stream(client, session_id, last_event_id=cursor,
                            max_events=cut - cursor if cut > cursor else None)
        collected.extend(chunk)
        if collected:
            cursor = collected[-1]["seq"]
    # tail to the end
    collected.extend(read_stream(client, session_id, last_event_id=cursor))
    assert [e["seq"] for e in collected] == list(range(n))
    assert collected == full


def test_clarification_round_trip(tmp_path):
    client, manager = make_client(tmp_path, fixture="clarify_demo")
    resp = client.post("/sessions", json={"objective": "improve my enzyme"})
    session_id = resp.json()["session_id"]
    manager.wait(session_id)
    assert client.get(f"/sessions/{session_id}").json()["phase"] == "AwaitingClarification"

    answered = client.post(
        f"/sessions/{session_id}/clarification", json={"answer": "P00734 thermostability"}
    )
    assert answered.status_code == 202
    manager.wait(session_id)
    assert client.get(f"/sessions/{session_id}").json()["phase"] == "Done"
    kinds = [e["kind"] for e in read_stream(client, session_id)]
    assert "clarification_request" in kinds and "clarification_answer" in kinds

    again = client.post(f"/sessions/{session_id}/clarification", json={"answer": "again"})
    assert again.status_code == 409


def test_clarification_wrong_phase_409(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)  # runs to Done
    resp = client.post(f"/sessions/{session_id}/clarification", json={"answer": "x"})
    assert resp.status_code == 409


def test_report_not_ready_409(tmp_path):
    client, manager = make_client(tmp_path, fixture="clarify_demo")
    session_id = client.post("/sessions", json={"objective": "o"}).json()["session_id"]
    manager.wait(session_id)
    assert client.get(f"/sessions/{session_id}/report").status_code == 409


def test_report_after_done(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)
    report = client.get(f"/sessions/{session_id}/report")
    assert report.status_code == 200
    assert "Conclusions" in report.json()["text"]


def test_tools_include_synthesized_after_run(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)
    names = [t["name"] for t in client.get("/tools").json()]
    assert "predict_allergenicity" in names
    shown = client.get("/tools/predict_allergenicity")
    assert shown.status_code == 200
    assert shown.json()["manifest"]["metrics"]["auroc"] == 0.96
    assert client.get("/tools/absent_tool").status_code == 404


def test_restart_loses_no_events(tmp_path):
    client, manager = make_client(tmp_path)
    session_id = start_and_wait(client, manager)
    before = client.get(f"/sessions/{session_id}/record").json()

    manager2 = SessionManager(tmp_path / "data")
    client2 = TestClient(create_app(manager2))
    after = client2.get(f"/sessions/{session_id}/record").json()
    assert after == before
    assert client2.get(f"/sessions/{session_id}").json()["phase"] == "Done"


def test_eval_runs_endpoint(tmp_path):
    client, _ = make_client(tmp_path)
    body = {
        "instances": [
            {"instance_id": "q1", "wins": {"X": 2, "Y": 1, "Z": 0}},
            {"instance_id": "t1", "wins": {"X": 1, "Y": 1, "Z": 1}},
        ],
        "tiers": {"q1": "question", "t1": "task"},
    }
    resp = client.post("/eval/runs", json=body)
    assert resp.status_code == 200
    out = resp.json()
    assert out["results"][0]["scores"]["X"] == 2.0
    assert out["per_tier_mean"]["question"]["X"] == 2.0
