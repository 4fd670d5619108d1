"""HTTP facade over the pipeline: scene upload, script generation, live
event-sourced sessions and metric reports.

The service adds no story logic of its own; every response is exactly what
the corresponding library call returns, so a client replaying the same
events over HTTP and in-process must observe identical results. Each session
event is appended to its JSONL log before the request is acknowledged, and
all state is rebuilt from those logs on startup.
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import engine
from .anchors import AnchorTable, DEFAULT_MATCH_THRESHOLD, match_names
from .errors import NarravoError, ParseError, ValidationError
from .gateway import BackendConfig, GenerationRequest, PromptStrategy, generate_script
from .metrics import (
    LatencyTrace,
    OcclusionTrial,
    PairedPositions,
    RatingSample,
    ScenarioInputs,
    build_report,
)
from .pipeline import validation_to_json
from .scene import OcclusionTier, SceneSnapshot, load_scene, scene_to_json, serialize_scene
from .script import (
    NarrativeScript,
    StoryTree,
    link_story_tree,
    parse_script,
    script_to_json,
    serialize_script,
    validate_script,
)

_SAFE_NAME_RE = re.compile(r"[^A-Za-z0-9_.-]+")


def _safe_name(name: str) -> str:
    return _SAFE_NAME_RE.sub("_", name) or "unnamed"


@dataclass(frozen=True)
class ServiceConfig:
    backend: BackendConfig
    data_dir: Path = Path("runtime_data")
    anchor_threshold: float = DEFAULT_MATCH_THRESHOLD
    max_fragments: int = 13
    scene_paths: tuple[Path, ...] = ()  # preloaded at startup
    frontend_dist: Path | None = None

    @staticmethod
    def from_file(path: str | Path) -> "ServiceConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        backend_doc = doc.get("backend", {})
        kind = backend_doc.get("kind", "replay")
        if kind == "replay":
            backend = BackendConfig.replay(
                backend_doc.get("fixtures", "data/fixtures"),
                model=backend_doc.get("model", "replay"),
            )
        else:
            backend = BackendConfig.live(
                endpoint=backend_doc.get("endpoint"),
                model=backend_doc.get("model", "gpt-4o"),
                timeout_s=float(backend_doc.get("timeout_s", 30.0)),
            )
        scenes = doc.get("scenes", [])
        if isinstance(scenes, str):
            scenes = [scenes]
        frontend = doc.get("frontend_dist")
        return ServiceConfig(
            backend=backend,
            data_dir=Path(doc.get("data_dir", "runtime_data")),
            anchor_threshold=float(doc.get("anchor_threshold", DEFAULT_MATCH_THRESHOLD)),
            max_fragments=int(doc.get("max_fragments", 13)),
            scene_paths=tuple(Path(p) for p in scenes),
            frontend_dist=Path(frontend) if frontend else None,
        )


@dataclass
class _ScriptRecord:
    script_id: str
    scene_id: str
    strategy: str
    script: NarrativeScript
    tree: StoryTree
    anchors: AnchorTable
    validation: dict


@dataclass
class _SessionRecord:
    session_id: str
    script_id: str
    state: engine.SessionState
    events_path: Path
    created: float = 0.0  # epoch seconds
    lock: threading.Lock = dataclass_field(default_factory=threading.Lock)


class ServiceStore:
    """In-memory registry backed by JSON/JSONL files under data_dir."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.scenes: dict[str, SceneSnapshot] = {}
        self.scripts: dict[str, _ScriptRecord] = {}
        self.sessions: dict[str, _SessionRecord] = {}
        (config.data_dir / "scenes").mkdir(parents=True, exist_ok=True)
        (config.data_dir / "scripts").mkdir(parents=True, exist_ok=True)
        (config.data_dir / "sessions").mkdir(parents=True, exist_ok=True)

    # -- scenes

    def add_scene(self, snapshot: SceneSnapshot) -> str:
        self.scenes[snapshot.scene_id] = snapshot
        path = self.config.data_dir / "scenes" / f"{_safe_name(snapshot.scene_id)}.json"
        path.write_text(serialize_scene(snapshot), encoding="utf-8")
        return snapshot.scene_id

    # -- scripts

    def register_script(
        self, scene_id: str, strategy: str, script: NarrativeScript, persist: bool = True
    ) -> _ScriptRecord:
        scene = self.scenes[scene_id]
        report = validate_script(script)
        if report.errors:
            codes = ", ".join(sorted({v.code for v in report.errors}))
            raise ValidationError(f"generated script failed validation: {codes}")
        tree = link_story_tree(script)
        anchors = match_names(
            [ref.name for ref in script.objects], scene, self.config.anchor_threshold
        )
        script_id = _script_digest(script)
        record = _ScriptRecord(
            script_id, scene_id, strategy, script, tree, anchors,
            validation_to_json(report),
        )
        self.scripts[script_id] = record
        if persist:
            path = self.config.data_dir / "scripts" / f"{script_id}.json"
            path.write_text(
                json.dumps(
                    {
                        "script_id": script_id,
                        "scene_id": scene_id,
                        "strategy": strategy,
                        "script": script_to_json(script),
                    },
                    indent=2,
                )
                + "\n",
                encoding="utf-8",
            )
        return record

    # -- sessions

    def create_session(self, script_id: str) -> _SessionRecord:
        record = self.scripts[script_id]
        session_id = uuid.uuid4().hex
        created = time.time()
        state = engine.start_session(record.tree, record.anchors)
        events_path = self.config.data_dir / "sessions" / f"{session_id}.events.jsonl"
        meta_path = self.config.data_dir / "sessions" / f"{session_id}.meta.json"
        meta_path.write_text(
            json.dumps(
                {"session_id": session_id, "script_id": script_id, "created": created}
            )
            + "\n",
            encoding="utf-8",
        )
        events_path.touch()
        session = _SessionRecord(session_id, script_id, state, events_path, created)
        self.sessions[session_id] = session
        return session

    def apply_event(self, session: _SessionRecord, event: engine.SessionEvent):
        with session.lock:
            new_state, activated = engine.handle_event(session.state, event)
            # Persist before acknowledging; replay-on-restart rebuilds state.
            with session.events_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(event.to_json()) + "\n")
                fh.flush()
            session.state = new_state
            return new_state, activated

    # -- recovery

    def recover(self) -> None:
        scenes_dir = self.config.data_dir / "scenes"
        for file in sorted(scenes_dir.glob("*.json")):
            snapshot = load_scene(file.read_text(encoding="utf-8"))
            self.scenes[snapshot.scene_id] = snapshot
        scripts_dir = self.config.data_dir / "scripts"
        for file in sorted(scripts_dir.glob("*.json")):
            doc = json.loads(file.read_text(encoding="utf-8"))
            if doc["scene_id"] not in self.scenes:
                continue
            self.register_script(
                doc["scene_id"], doc["strategy"], parse_script(doc["script"]),
                persist=False,
            )
        sessions_dir = self.config.data_dir / "sessions"
        for meta_file in sorted(sessions_dir.glob("*.meta.json")):
            meta = json.loads(meta_file.read_text(encoding="utf-8"))
            script_id = meta["script_id"]
            if script_id not in self.scripts:
                continue
            record = self.scripts[script_id]
            events_path = sessions_dir / f"{meta['session_id']}.events.jsonl"
            events = (
                engine.events_from_jsonl(events_path.read_text(encoding="utf-8"))
                if events_path.exists()
                else []
            )
            state = engine.replay(record.tree, record.anchors, events)
            self.sessions[meta["session_id"]] = _SessionRecord(
                meta["session_id"], script_id, state, events_path,
                float(meta.get("created", 0.0)),
            )


def _script_digest(script: NarrativeScript) -> str:
    import hashlib

    return hashlib.sha256(serialize_script(script).encode()).hexdigest()[:12]


def state_payload(store: ServiceStore, session: _SessionRecord) -> dict:
    state = session.state
    return {
        "session_id": session.session_id,
        "script_id": session.script_id,
        "created": session.created,
        "current_beat": state.current_beat,
        "beat_count": len(state.tree.beats),
        "completed": state.current_beat == len(state.tree.beats) - 1,
        "activated": list(state.activated),
        "scan_counts": dict(sorted(state.scan_counts().items())),
        "view_durations": dict(state.view_durations),
        "path": list(state.path),
        "warnings": list(state.warnings),
        "event_count": len(state.log),
    }


def _script_payload(store: ServiceStore, record: _ScriptRecord) -> dict:
    scene = store.scenes[record.scene_id]
    return {
        "script_id": record.script_id,
        "scene_id": record.scene_id,
        "strategy": record.strategy,
        "validation": record.validation,
        "script": script_to_json(record.script),
        "anchors": record.anchors.to_json(),
        "scene_objects": scene_to_json(scene)["objects"],
        "tree": {
            "root_fragments": list(record.tree.root_fragments),
            "after_edges": [list(edge) for edge in record.tree.after_edges],
            "orphans": list(record.tree.orphans),
        },
    }


def _parse_report_body(doc: dict) -> dict:
    def ratings(rows) -> list[RatingSample]:
        return [
            RatingSample(
                rater=str(r["rater"]),
                dimension=str(r["dimension"]),
                value=float(r["value"]),
                scale_max=float(r["scale_max"]),
                story=r.get("story"),
            )
            for r in rows
        ]

    scenarios = []
    for s in doc.get("scenarios", []):
        positions = None
        if s.get("positions"):
            positions = PairedPositions(
                tuple(
                    (tuple(map(float, p["true"])), tuple(map(float, p["detected"])))
                    for p in s["positions"]
                )
            )
        occlusion = None
        if s.get("occlusion"):
            occlusion = tuple(
                OcclusionTrial(OcclusionTier[t["tier"]], bool(t["correct"]))
                for t in s["occlusion"]
            )
        latency_trace = None
        if s.get("latency"):
            latency_trace = LatencyTrace(
                tuple(
                    (float(e["t_event"]), float(e["t_response"]))
                    for e in s["latency"]
                )
            )
        nbi = None
        if s.get("nbi_scores"):
            nbi = tuple(
                RatingSample(f"r{i}", "NBI", float(v), 10.0)
                for i, v in enumerate(s["nbi_scores"])
            )
        lighting = None
        if s.get("lighting"):
            lighting = (
                float(s["lighting"]["ap_extreme"]),
                float(s["lighting"]["ap_normal"]),
            )
        fragment_tags = theme = None
        if s.get("fragments"):
            fragment_tags = tuple(
                (tuple(f.get("topic_tags", ())), tuple(f.get("content_tags", ())))
                for f in s["fragments"]["fragments"]
            )
            theme = tuple(s["fragments"].get("theme", ()))
        scenarios.append(
            ScenarioInputs(
                name=str(s.get("name", f"scenario_{len(scenarios)}")),
                positions=positions,
                occlusion_trials=occlusion,
                latency_trace=latency_trace,
                nbi_scores=nbi,
                lighting=lighting,
                fragment_tags=fragment_tags,
                theme=theme,
            )
        )
    return {
        "scenarios": scenarios,
        "metaphor_ratings": ratings(doc.get("metaphor_ratings", [])),
        "story_ratings": ratings(doc.get("story_ratings", [])),
    }


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="narravo", version="0.1.0")
    store = ServiceStore(config)
    store.recover()
    for path in config.scene_paths:
        store.add_scene(load_scene(Path(path).read_text(encoding="utf-8")))
    app.state.store = store

    @app.exception_handler(NarravoError)
    async def narravo_error_handler(request: Request, exc: NarravoError):
        status = 409 if isinstance(exc, engine.EventOrderingError) else 422
        if isinstance(exc, ParseError):
            status = 400
        return JSONResponse(
            status_code=status,
            content={"error": {"type": type(exc).__name__, "message": str(exc)}},
        )

    def get_session(session_id: str) -> _SessionRecord:
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")
        return session

    @app.post("/scenes", status_code=201)
    async def post_scene(request: Request):
        snapshot = load_scene(await request.body())
        return {"scene_id": store.add_scene(snapshot)}

    @app.get("/scenes/{scene_id}")
    async def get_scene(scene_id: str):
        scene = store.scenes.get(scene_id)
        if scene is None:
            raise HTTPException(404, detail=f"unknown scene {scene_id!r}")
        return scene_to_json(scene)

    @app.post("/scripts", status_code=201)
    async def post_script(body: dict):
        scene_id = body.get("scene_id")
        if scene_id not in store.scenes:
            raise HTTPException(404, detail=f"unknown scene {scene_id!r}")
        strategy = PromptStrategy.from_tag(str(body.get("strategy", "s2")))
        request = GenerationRequest(
            store.scenes[scene_id],
            strategy,
            int(body.get("max_fragments", config.max_fragments)),
            str(body.get("seed", "")),
        )
        result = generate_script(request, config.backend)
        record = store.register_script(scene_id, strategy.value, result.script)
        payload = _script_payload(store, record)
        payload["elapsed_s"] = result.elapsed_s
        return payload

    @app.get("/scripts")
    async def list_scripts():
        return [
            {
                "script_id": r.script_id,
                "scene_id": r.scene_id,
                "strategy": r.strategy,
            }
            for r in store.scripts.values()
        ]

    @app.get("/scripts/{script_id}")
    async def get_script(script_id: str):
        record = store.scripts.get(script_id)
        if record is None:
            raise HTTPException(404, detail=f"unknown script {script_id!r}")
        return _script_payload(store, record)

    @app.post("/sessions", status_code=201)
    async def post_session(body: dict):
        script_id = body.get("script_id")
        if script_id not in store.scripts:
            raise HTTPException(404, detail=f"unknown script {script_id!r}")
        session = store.create_session(script_id)
        return state_payload(store, session)

    @app.post("/sessions/{session_id}/events")
    async def post_event(session_id: str, body: dict):
        session = get_session(session_id)
        event = engine.SessionEvent.from_json(body)
        _, activated = store.apply_event(session, event)
        return {
            "activated": activated,
            "state": state_payload(store, session),
        }

    @app.get("/sessions/{session_id}/state")
    async def get_state(session_id: str):
        return state_payload(store, get_session(session_id))

    @app.get("/sessions/{session_id}/triggers")
    async def get_triggers(session_id: str):
        session = get_session(session_id)
        return {
            "triggers": [
                {"fragment": name, "unmet": summary}
                for name, summary in engine.available_triggers(session.state)
            ]
        }

    @app.get("/sessions/{session_id}/log")
    async def get_log(session_id: str):
        session = get_session(session_id)
        return {
            "traversal": engine.export_log(session.state).to_json(),
            "events": [e.to_json() for e in session.state.log],
        }

    @app.post("/metrics/report")
    async def post_metrics_report(body: dict):
        parsed = _parse_report_body(body)
        report = build_report(
            scenarios=parsed["scenarios"],
            metaphor_ratings=parsed["metaphor_ratings"],
            story_ratings=parsed["story_ratings"],
        )
        return {"report": report.to_json(), "text": report.render_text()}

    if config.frontend_dist and Path(config.frontend_dist).is_dir():
        app.mount(
            "/ui",
            StaticFiles(directory=str(config.frontend_dist), html=True),
            name="ui",
        )

    return app
