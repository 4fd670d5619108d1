"""Prompt construction and VLM transport.

Three generation strategies are supported: conventional object-driven
narration, metaphor-linked narration, and direct scene-to-storyboard (no
object enumeration at all). Prompts are deterministic functions of
(scene, strategy, fragment budget, variation token), so a recorded fixture
keyed by digest(prompt, model) replays the whole pipeline bit-for-bit.

Live calls go through an OpenAI-style JSON body; the backend URL and bearer
key come from ``NARRAVO_VLM_URL`` / ``NARRAVO_VLM_KEY`` unless configured
explicitly.
"""

from __future__ import annotations

import enum
import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import NarravoError, ValidationError
from .scene import SceneSnapshot
from .script import NarrativeScript, ScriptParseError, parse_script

ENV_URL = "NARRAVO_VLM_URL"
ENV_KEY = "NARRAVO_VLM_KEY"

TEMPLATE_VERSION = "2025.1"
DEFAULT_REPLAY_MODEL = "replay"
_MAX_TRANSPORT_RETRIES = 2


class GatewayError(NarravoError):
    pass


class FixtureMissError(GatewayError):
    """No recorded response for this (prompt, model) digest."""

    def __init__(self, key: str, path: Path):
        self.key = key
        super().__init__(f"no fixture {key!r} under {path}")


class GenerationFormatError(GatewayError):
    """The backend answered, but not with a parseable script."""

    def __init__(self, message: str, raw_response: str, elapsed_s: float = 0.0):
        self.raw_response = raw_response
        self.elapsed_s = elapsed_s
        super().__init__(message)


class TransportFailure(GatewayError):
    """Live backend unreachable after retries."""


class PromptStrategy(enum.Enum):
    S1_CONVENTIONAL = "s1"
    S2_METAPHORICAL = "s2"
    S3_DIRECT = "s3"

    @staticmethod
    def from_tag(tag: str) -> "PromptStrategy":
        for strategy in PromptStrategy:
            if strategy.value == tag.lower():
                return strategy
        raise ValidationError(f"unknown strategy {tag!r}; expected s1, s2 or s3")


@dataclass(frozen=True)
class GenerationRequest:
    scene: SceneSnapshot
    strategy: PromptStrategy
    max_fragments: int = 13
    seed: str = ""  # variation token; distinct seeds produce distinct prompts

    def __post_init__(self):
        if self.max_fragments < 1:
            raise ValidationError("max_fragments must be positive")


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # "live" | "replay"
    endpoint: str | None = None
    model: str = DEFAULT_REPLAY_MODEL
    timeout_s: float = 30.0
    credentials_env: str = ENV_KEY
    fixture_path: Path | None = None

    @staticmethod
    def live(
        endpoint: str | None = None,
        model: str = "gpt-4o",
        timeout_s: float = 30.0,
        credentials_env: str = ENV_KEY,
    ) -> "BackendConfig":
        if timeout_s <= 0:
            raise ValidationError("timeout must be positive")
        return BackendConfig(
            "live", endpoint=endpoint, model=model,
            timeout_s=timeout_s, credentials_env=credentials_env,
        )

    @staticmethod
    def replay(fixture_path: str | Path, model: str = DEFAULT_REPLAY_MODEL) -> "BackendConfig":
        return BackendConfig("replay", model=model, fixture_path=Path(fixture_path))


# ---------------------------------------------------------------------------
# Prompt templates

_FORMAT_BLOCK = """\
Answer with a single JSON document and nothing else, using exactly this shape:
{
  "object": [{"name": "...", "role": "key" | "branching", "metaphor": "..." (optional)}],
  "mainstory": [{"index": 0, "text": "...", "involved_objects": ["..."]}],
  "fragments": [{
    "name": "...", "topic": "...", "core_object": "...",
    "agents": ["user"], "interaction_mode": "...", "symbolic_meaning": "...",
    "content": "...",
    "triggerCondition": {"kind": "scan", "object": "..."}
  }]
}
Trigger kinds: {"kind":"scan","object":N}, {"kind":"proximity","object":N,"radius":R},
{"kind":"after","fragment":F}, and {"kind":"all_of"|"any_of", "all_of"/"any_of":[...]}.
Every core_object and trigger object must appear in "object"; mainstory indices
start at 0 and are contiguous."""

_REPAIR_TEMPLATE = """\
Your previous answer could not be used: {error}

Previous answer:
{raw}

Reply again, correcting the problem. {format_block}"""


def _coarse(value: float) -> str:
    return f"{value:.1f}"


def _object_lines(scene: SceneSnapshot, with_metaphors: bool) -> list[str]:
    lines = []
    for obj in scene.objects:
        px, py, pz = obj.pose.position
        line = (
            f"- {obj.name} (state: {obj.state.label}; material: "
            f"{obj.semantics.physical}; use: {obj.semantics.functional}; "
            f"at {_coarse(px)},{_coarse(py)},{_coarse(pz)} m)"
        )
        if with_metaphors and obj.semantics.metaphorical is not None:
            line += (
                f" [symbol: {obj.semantics.metaphorical.text}, "
                f"weight {obj.semantics.metaphorical.weight:.2f}]"
            )
        lines.append(line)
    return lines


def build_prompt(request: GenerationRequest) -> str:
    """Deterministic prompt text for (scene, strategy, max_fragments, seed)."""
    scene = request.scene
    header = f"Scene {scene.scene_id!r}."
    parts: list[str]
    if request.strategy is PromptStrategy.S1_CONVENTIONAL:
        parts = [
            header + " The environment contains these items:",
            *_object_lines(scene, with_metaphors=False),
            "",
            "Select the most story-worthy items as key objects and write a story"
            " with a conventional narrative structure (setup, development,"
            " resolution) around them. Mark the rest as branching objects and"
            f" attach at most {request.max_fragments} triggerable fragments.",
        ]
    elif request.strategy is PromptStrategy.S2_METAPHORICAL:
        parts = [
            header + " The environment contains these items:",
            *_object_lines(scene, with_metaphors=True),
            "",
            "Select the most story-worthy items as key objects and write a story"
            " that uses both a traditional narrative structure and metaphorical"
            " links between the objects: give each selected object a symbolic"
            " meaning (fill its \"metaphor\" field) and let those symbols carry"
            " the plot. Mark the rest as branching objects and attach at most"
            f" {request.max_fragments} triggerable fragments.",
        ]
    else:
        parts = [
            header + f" You are looking at an indoor environment with"
            f" {len(scene.objects)} distinct items in view.",
            "",
            "Write a storyboard directly from the overall impression of this"
            " scene, without tying the plot to specific named items. Invent"
            " whatever scene elements the story needs and declare them in the"
            f" \"object\" list; attach at most {request.max_fragments}"
            " triggerable fragments.",
        ]
    parts += ["", _FORMAT_BLOCK]
    if request.seed:
        parts += ["", f"Variation token: {request.seed}"]
    return "\n".join(parts)


def template_hash() -> str:
    """Digest of the prompt templates; recorded in bundles so a generated
    story can be traced to the exact template wording."""
    blob = "\0".join([TEMPLATE_VERSION, _FORMAT_BLOCK, _REPAIR_TEMPLATE])
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Fixture store

def fixture_key(prompt: str, model: str) -> str:
    digest = hashlib.sha256(f"{model}\n{prompt}".encode()).hexdigest()
    return digest[:16]


class FixtureStore:
    """Directory of recorded responses, one JSON file per (prompt, model)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def record(self, prompt: str, model: str, response: str, elapsed_s: float = 0.0) -> str:
        key = fixture_key(prompt, model)
        self.path.mkdir(parents=True, exist_ok=True)
        doc = {
            "key": key,
            "request_digest": hashlib.sha256(f"{model}\n{prompt}".encode()).hexdigest(),
            "model": model,
            "prompt": prompt,
            "response": response,
            "elapsed_s": elapsed_s,
        }
        (self.path / f"{key}.json").write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        return key

    def load(self, prompt: str, model: str) -> tuple[str, float]:
        key = fixture_key(prompt, model)
        file = self.path / f"{key}.json"
        if not file.exists():
            raise FixtureMissError(key, self.path)
        doc = json.loads(file.read_text(encoding="utf-8"))
        return doc["response"], float(doc.get("elapsed_s", 0.0))


def record_fixture(
    request: GenerationRequest,
    response: str,
    path: str | Path,
    model: str = DEFAULT_REPLAY_MODEL,
    elapsed_s: float = 0.0,
) -> str:
    """Store a response for later replay; returns the fixture key."""
    return FixtureStore(path).record(build_prompt(request), model, response, elapsed_s)


# ---------------------------------------------------------------------------
# Generation


@dataclass(frozen=True)
class GenerationResult:
    script: NarrativeScript
    raw_response: str
    elapsed_s: float
    prompt: str
    fixture_key: str
    model: str
    repaired: bool = False


def _extract_content(payload: str) -> str:
    """Accept either a bare completion or an OpenAI-style envelope."""
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError:
        return payload
    if isinstance(doc, dict):
        choices = doc.get("choices")
        if isinstance(choices, list) and choices:
            message = choices[0].get("message", {})
            content = message.get("content")
            if isinstance(content, str):
                return content
        content = doc.get("content")
        if isinstance(content, str):
            return content
    return payload


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    if stripped.startswith("```"):
        lines = stripped.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        stripped = "\n".join(lines)
    return stripped


def _post_live(
    prompt: str,
    backend: BackendConfig,
    client: httpx.Client | None,
    backoff_s: float,
) -> str:
    endpoint = backend.endpoint or os.environ.get(ENV_URL)
    if not endpoint:
        raise TransportFailure(f"no endpoint configured and {ENV_URL} is unset")
    headers = {}
    key = os.environ.get(backend.credentials_env, "")
    if key:
        headers["Authorization"] = f"Bearer {key}"
    body = {
        "model": backend.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0.0,
    }
    owned = client is None
    client = client or httpx.Client(timeout=backend.timeout_s)
    try:
        last_error: Exception | None = None
        for attempt in range(1 + _MAX_TRANSPORT_RETRIES):
            if attempt:
                time.sleep(backoff_s * 2 ** (attempt - 1))
            try:
                response = client.post(endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = TransportFailure(
                    f"backend returned {response.status_code}"
                )
                continue
            if response.status_code >= 400:
                raise TransportFailure(
                    f"backend rejected the request: {response.status_code} "
                    f"{response.text[:200]}"
                )
            return response.text
        raise TransportFailure(
            f"backend unreachable after {1 + _MAX_TRANSPORT_RETRIES} attempts: "
            f"{last_error}"
        )
    finally:
        if owned:
            client.close()


def generate_script(
    request: GenerationRequest,
    backend: BackendConfig,
    client: httpx.Client | None = None,
    retry_backoff_s: float = 1.0,
) -> GenerationResult:
    """Run one generation through the configured backend.

    Replay answers come from the fixture store and are bit-deterministic.
    Live answers that fail to parse get exactly one structured repair
    re-prompt before :class:`GenerationFormatError` is raised.
    """
    prompt = build_prompt(request)
    key = fixture_key(prompt, backend.model)

    if backend.kind == "replay":
        if backend.fixture_path is None:
            raise ValidationError("replay backend requires a fixture path")
        raw, elapsed = FixtureStore(backend.fixture_path).load(prompt, backend.model)
        try:
            script = parse_script(_strip_fences(_extract_content(raw)))
        except ScriptParseError as exc:
            raise GenerationFormatError(
                f"fixture {key} does not contain a parseable script: {exc}",
                raw, elapsed,
            ) from exc
        return GenerationResult(script, raw, elapsed, prompt, key, backend.model)

    if backend.kind != "live":
        raise ValidationError(f"unknown backend kind {backend.kind!r}")

    started = time.monotonic()
    raw = _post_live(prompt, backend, client, retry_backoff_s)
    repaired = False
    try:
        script = parse_script(_strip_fences(_extract_content(raw)))
    except ScriptParseError as first_error:
        repaired = True
        repair_prompt = _REPAIR_TEMPLATE.format(
            error=first_error, raw=_extract_content(raw), format_block=_FORMAT_BLOCK
        )
        raw = _post_live(repair_prompt, backend, client, retry_backoff_s)
        try:
            script = parse_script(_strip_fences(_extract_content(raw)))
        except ScriptParseError as exc:
            raise GenerationFormatError(
                f"unparseable response even after repair: {exc}",
                raw, time.monotonic() - started,
            ) from exc
    elapsed = time.monotonic() - started
    return GenerationResult(script, raw, elapsed, prompt, key, backend.model, repaired)
