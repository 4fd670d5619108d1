#!/usr/bin/env python3
"""Service walkthrough: the same session as demo 03, but through the HTTP
API the browser client uses. Runs the app in-process; `narravo serve` does
the same over a real port."""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from narravo.gateway import BackendConfig
from narravo.service import ServiceConfig, create_app

ROOT = Path(__file__).resolve().parent.parent

with tempfile.TemporaryDirectory() as data_dir:
    config = ServiceConfig(
        backend=BackendConfig.replay(ROOT / "data" / "fixtures"),
        data_dir=Path(data_dir),
    )
    with TestClient(create_app(config)) as client:
        scene_doc = (ROOT / "data" / "office_scene.json").read_text()
        scene_id = client.post("/scenes", content=scene_doc).json()["scene_id"]
        print(f"POST /scenes -> {scene_id}")

        script = client.post(
            "/scripts", json={"scene_id": scene_id, "strategy": "s2"}
        ).json()
        print(f"POST /scripts -> {script['script_id']} "
              f"({len(script['script']['fragments'])} fragments, "
              f"validation ok={script['validation']['ok']})")

        session = client.post(
            "/sessions", json={"script_id": script["script_id"]}
        ).json()
        sid = session["session_id"]
        print(f"POST /sessions -> {sid}")

        for t, obj in enumerate(["door_01", "cabinet_02", "curtain_03"], start=1):
            body = client.post(
                f"/sessions/{sid}/events",
                json={"t": float(t), "kind": "scan", "object": obj},
            ).json()
            print(f"POST /sessions/{{id}}/events scan {obj:12s} -> "
                  f"activated {body['activated']}, beat {body['state']['current_beat']}")

        state = client.get(f"/sessions/{sid}/state").json()
        print(f"GET /sessions/{{id}}/state -> completed={state['completed']}, "
              f"{len(state['activated'])} fragments active")

        triggers = client.get(f"/sessions/{sid}/triggers").json()["triggers"]
        print(f"GET /sessions/{{id}}/triggers -> {len(triggers)} still waiting")

        log = client.get(f"/sessions/{sid}/log").json()
        print(f"GET /sessions/{{id}}/log -> path {log['traversal']['path']}")

        report = client.post(
            "/metrics/report",
            json={
                "scenarios": [
                    {
                        "name": "living_area",
                        "latency": [
                            {"t_event": 0.0, "t_response": 4.2},
                            {"t_event": 10.0, "t_response": 14.8},
                        ],
                        "nbi_scores": [2, 3],
                    }
                ]
            },
        ).json()
        row = report["report"]["scenarios"][0]
        print(f"POST /metrics/report -> latency {row['latency_s']} s, NBI {row['nbi']}")
