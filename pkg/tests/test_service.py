from __future__ import annotations

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from narravo.anchors import match_names
from narravo.engine import SessionEvent, export_log, replay
from narravo.gateway import BackendConfig
from narravo.scene import load_scene
from narravo.script import link_story_tree, parse_script
from narravo.service import ServiceConfig, create_app

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture()
def config(tmp_path) -> ServiceConfig:
    return ServiceConfig(
        backend=BackendConfig.replay(DATA / "fixtures"),
        data_dir=tmp_path / "runtime",
    )


@pytest.fixture()
def client(config):
    with TestClient(create_app(config)) as c:
        yield c


@pytest.fixture()
def scene_doc() -> str:
    return (DATA / "office_scene.json").read_text(encoding="utf-8")


def _setup_session(client, scene_doc, strategy="s2"):
    scene_id = client.post("/scenes", content=scene_doc).json()["scene_id"]
    script = client.post(
        "/scripts", json={"scene_id": scene_id, "strategy": strategy}
    ).json()
    session = client.post("/sessions", json={"script_id": script["script_id"]}).json()
    return script, session


def test_scene_upload_returns_id(client, scene_doc):
    response = client.post("/scenes", content=scene_doc)
    assert response.status_code == 201
    assert response.json() == {"scene_id": "office_lab"}


def test_malformed_scene_rejected(client):
    response = client.post("/scenes", content='{"scene_id": "x"}')
    assert response.status_code == 400
    assert response.json()["error"]["type"] == "SceneParseError"


def test_generate_script_over_http(client, scene_doc):
    script, _ = _setup_session(client, scene_doc)
    assert script["strategy"] == "s2"
    assert script["validation"]["ok"]
    assert len(script["script"]["fragments"]) == 13
    assert len(script["anchors"]["bindings"]) == 13
    assert script["elapsed_s"] == 4.7
    fetched = client.get(f"/scripts/{script['script_id']}").json()
    assert fetched["script"] == script["script"]


def test_unknown_ids_return_404(client, scene_doc):
    assert client.post("/scripts", json={"scene_id": "nope", "strategy": "s1"}).status_code == 404
    assert client.post("/sessions", json={"script_id": "nope"}).status_code == 404
    assert client.get("/sessions/nope/state").status_code == 404
    assert client.get("/scripts/nope").status_code == 404


def test_scan_event_activates_fragment(client, scene_doc):
    _, session = _setup_session(client, scene_doc)
    sid = session["session_id"]
    response = client.post(
        f"/sessions/{sid}/events", json={"t": 1.0, "kind": "scan", "object": "door_01"}
    )
    body = response.json()
    assert "frag_door_threshold" in body["activated"]
    assert body["state"]["current_beat"] == 1
    state = client.get(f"/sessions/{sid}/state").json()
    assert state == body["state"]


def test_http_session_equals_library_replay(client, scene_doc):
    script, session = _setup_session(client, scene_doc)
    sid = session["session_id"]
    events = [
        {"t": 0.0, "kind": "scan", "object": "curtain_03"},
        {"t": 1.0, "kind": "proximity", "object": "rack_server_01", "distance": 1.2},
        {"t": 2.0, "kind": "view_start", "fragment": "frag_curtain_veil"},
        {"t": 5.5, "kind": "view_end", "fragment": "frag_curtain_veil"},
        {"t": 6.0, "kind": "scan", "object": "door_01"},
        {"t": 7.0, "kind": "scan", "object": "mystery_box"},
        {"t": 8.0, "kind": "advance"},
    ]
    for event in events:
        assert client.post(f"/sessions/{sid}/events", json=event).status_code == 200

    scene = load_scene(scene_doc)
    parsed = parse_script(script["script"])
    tree = link_story_tree(parsed)
    anchors = match_names([r.name for r in parsed.objects], scene)
    expected = replay(tree, anchors, [SessionEvent.from_json(e) for e in events])

    state = client.get(f"/sessions/{sid}/state").json()
    assert state["activated"] == list(expected.activated)
    assert state["current_beat"] == expected.current_beat
    assert state["path"] == list(expected.path)
    log = client.get(f"/sessions/{sid}/log").json()
    assert log["traversal"] == export_log(expected).to_json()


def test_out_of_order_event_conflicts(client, scene_doc):
    _, session = _setup_session(client, scene_doc)
    sid = session["session_id"]
    client.post(f"/sessions/{sid}/events", json={"t": 5.0, "kind": "scan", "object": "door_01"})
    response = client.post(
        f"/sessions/{sid}/events", json={"t": 1.0, "kind": "scan", "object": "cabinet_02"}
    )
    assert response.status_code == 409


def test_triggers_endpoint_lists_unmet_conditions(client, scene_doc):
    _, session = _setup_session(client, scene_doc)
    sid = session["session_id"]
    triggers = client.get(f"/sessions/{sid}/triggers").json()["triggers"]
    assert len(triggers) == 13
    client.post(f"/sessions/{sid}/events", json={"t": 1.0, "kind": "scan", "object": "door_01"})
    remaining = client.get(f"/sessions/{sid}/triggers").json()["triggers"]
    names = {t["fragment"] for t in remaining}
    assert "frag_door_threshold" not in names
    assert "frag_bookshelf_archive" not in names  # after-chain fired too


def test_parallel_sessions_are_independent(client, scene_doc):
    _, first = _setup_session(client, scene_doc)
    second = client.post("/sessions", json={"script_id": first["script_id"]}).json()
    client.post(
        f"/sessions/{first['session_id']}/events",
        json={"t": 1.0, "kind": "scan", "object": "door_01"},
    )
    other = client.get(f"/sessions/{second['session_id']}/state").json()
    assert other["activated"] == []
    assert other["event_count"] == 0


def test_state_survives_restart(config, scene_doc):
    with TestClient(create_app(config)) as client:
        _, session = _setup_session(client, scene_doc)
        sid = session["session_id"]
        client.post(f"/sessions/{sid}/events", json={"t": 1.0, "kind": "scan", "object": "door_01"})
        client.post(f"/sessions/{sid}/events", json={"t": 2.0, "kind": "scan", "object": "cabinet_02"})
        before = client.get(f"/sessions/{sid}/state").json()

    with TestClient(create_app(config)) as recovered:
        after = recovered.get(f"/sessions/{sid}/state").json()
        assert after == before
        # the recovered session keeps accepting events
        response = recovered.post(
            f"/sessions/{sid}/events",
            json={"t": 3.0, "kind": "scan", "object": "curtain_03"},
        )
        assert "frag_curtain_veil" in response.json()["activated"]


def test_metrics_report_endpoint(client):
    body = {
        "scenarios": [
            {
                "name": "living_area",
                "occlusion": [{"tier": "T30", "correct": True}] * 5
                + [{"tier": "T90", "correct": False}],
                "latency": [
                    {"t_event": 0.0, "t_response": 4.2},
                    {"t_event": 10.0, "t_response": 14.8},
                ],
                "nbi_scores": [2, 3],
                "lighting": {"ap_extreme": 0.921, "ap_normal": 1.0},
            }
        ]
    }
    response = client.post("/metrics/report", json=body)
    assert response.status_code == 200
    row = response.json()["report"]["scenarios"][0]
    assert row["or_pct"] == 83.3
    assert row["latency_s"] == pytest.approx(4.5)
    assert row["nbi"] == pytest.approx(2.5)
    assert row["lr_pct"] == 92.1
    assert row["ce_m"] is None
    assert "living_area" in response.json()["text"]


def test_metrics_report_bad_input_rejected(client):
    response = client.post("/metrics/report", json={"scenarios": []})
    assert response.status_code == 422


def test_service_config_from_file(tmp_path):
    config_path = tmp_path / "serve.json"
    config_path.write_text(
        json.dumps(
            {
                "backend": {"kind": "replay", "fixtures": str(DATA / "fixtures")},
                "data_dir": str(tmp_path / "runtime"),
                "anchor_threshold": 0.4,
                "scenes": [str(DATA / "office_scene.json")],
            }
        )
    )
    config = ServiceConfig.from_file(config_path)
    assert config.anchor_threshold == 0.4
    with TestClient(create_app(config)) as client:
        assert client.get("/scenes/office_lab").status_code == 200
