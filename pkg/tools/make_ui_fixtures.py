#!/usr/bin/env python3
"""Dump real service payloads into frontend/test/fixtures so the browser
client's tests assert against genuine server output, not hand-written
imitations. Re-run after changing the service payload shapes."""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient

from narravo.gateway import BackendConfig
from narravo.service import ServiceConfig, create_app

WALKTHROUGH = [
    {"t": 1.0, "kind": "scan", "object": "door_01"},
    {"t": 2.0, "kind": "view_start", "fragment": "frag_door_threshold"},
    {"t": 9.5, "kind": "view_end", "fragment": "frag_door_threshold"},
    {"t": 12.0, "kind": "scan", "object": "cabinet_02"},
    {"t": 15.0, "kind": "scan", "object": "mystery_box"},
    {"t": 18.0, "kind": "scan", "object": "curtain_03"},
]


def main() -> None:
    out_dir = ROOT / "frontend" / "test" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        config = ServiceConfig(
            backend=BackendConfig.replay(ROOT / "data" / "fixtures"),
            data_dir=Path(tmp),
            scene_paths=(ROOT / "data" / "office_scene.json",),
        )
        with TestClient(create_app(config)) as client:
            for strategy in ("s1", "s2", "s3"):
                payload = client.post(
                    "/scripts", json={"scene_id": "office_lab", "strategy": strategy}
                ).json()
                (out_dir / f"script_{strategy}.json").write_text(
                    json.dumps(payload, indent=2) + "\n"
                )
                print(f"script_{strategy}.json: {payload['script_id']}")

            script_id = json.loads(
                (out_dir / "script_s2.json").read_text()
            )["script_id"]
            session = client.post("/sessions", json={"script_id": script_id}).json()
            sid = session["session_id"]
            steps = [{
                "event": None,
                "activated": [],
                "state": client.get(f"/sessions/{sid}/state").json(),
                "triggers": client.get(f"/sessions/{sid}/triggers").json()["triggers"],
            }]
            for event in WALKTHROUGH:
                response = client.post(f"/sessions/{sid}/events", json=event).json()
                steps.append({
                    "event": event,
                    "activated": response["activated"],
                    "state": client.get(f"/sessions/{sid}/state").json(),
                    "triggers": client.get(f"/sessions/{sid}/triggers").json()["triggers"],
                })
            (out_dir / "walkthrough_steps.json").write_text(
                json.dumps(steps, indent=2) + "\n"
            )
            print(f"walkthrough_steps.json: {len(steps)} steps")


if __name__ == "__main__":
    main()
