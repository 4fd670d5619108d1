"""End-to-end orchestration: scene file -> generated script -> validation ->
story tree -> anchor table, persisted as a reproducible bundle; plus batch
evaluation of recorded metric inputs.

Bundles carry provenance (template hash, fixture key, config digest) so a
generated story can be regenerated bit-for-bit from the same fixtures.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .anchors import (
    DEFAULT_MATCH_THRESHOLD,
    AnchorTable,
    match_names,
    progressive_anchor_selection,
)
from .errors import NarravoError, ValidationError
from .gateway import (
    BackendConfig,
    GenerationRequest,
    GenerationResult,
    PromptStrategy,
    TEMPLATE_VERSION,
    generate_script,
    template_hash,
)
from .metrics import (
    MetricReport,
    ScenarioInputs,
    build_report,
    read_latency_jsonl,
    read_occlusion_jsonl,
    read_positions_jsonl,
    read_ratings_csv,
)
from .scene import SceneSnapshot, load_scene, serialize_scene
from .script import (
    NarrativeScript,
    StoryTree,
    ValidationReport,
    link_story_tree,
    serialize_script,
    validate_script,
)


class StageError(NarravoError):
    """Failure tagged with the pipeline stage that produced it."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@dataclass(frozen=True)
class PipelineConfig:
    scene_path: Path
    strategy: PromptStrategy
    backend: BackendConfig
    output_dir: Path
    anchor_threshold: float = DEFAULT_MATCH_THRESHOLD
    max_fragments: int = 13
    seed: str = ""

    def digest(self) -> str:
        blob = json.dumps(
            {
                "scene": str(self.scene_path),
                "strategy": self.strategy.value,
                "backend": self.backend.kind,
                "model": self.backend.model,
                "threshold": self.anchor_threshold,
                "max_fragments": self.max_fragments,
                "seed": self.seed,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PipelineBundle:
    scene: SceneSnapshot
    script: NarrativeScript
    tree: StoryTree
    anchors: AnchorTable
    validation: ValidationReport
    generation: GenerationResult
    progressive_anchors: tuple[str, ...]
    output_dir: Path


def validation_to_json(report: ValidationReport) -> dict:
    return {
        "ok": report.ok,
        "violations": [
            {
                "code": v.code,
                "severity": v.severity,
                "path": v.path,
                "message": v.message,
            }
            for v in report.violations
        ],
    }


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def run_pipeline(config: PipelineConfig) -> PipelineBundle:
    """Execute every stage and persist the bundle.

    On failure the artifacts produced so far stay in the output directory for
    debugging and a :class:`StageError` names the failing stage.
    """
    out = Path(config.output_dir)

    try:
        scene = load_scene(Path(config.scene_path).read_text(encoding="utf-8"))
    except (OSError, NarravoError) as exc:
        raise StageError("scene", exc) from exc
    _write(out / "scene.json", serialize_scene(scene))

    request = GenerationRequest(
        scene, config.strategy, config.max_fragments, config.seed
    )
    try:
        generation = generate_script(request, config.backend)
    except NarravoError as exc:
        raise StageError("generate", exc) from exc
    _write(out / "script.json", serialize_script(generation.script))

    report = validate_script(generation.script)
    _write(out / "validation.json", json.dumps(validation_to_json(report), indent=2) + "\n")
    if report.errors:
        codes = ", ".join(sorted({v.code for v in report.errors}))
        raise StageError("validate", ValidationError(f"script invalid: {codes}"))

    try:
        tree = link_story_tree(generation.script)
    except NarravoError as exc:
        raise StageError("link", exc) from exc

    try:
        names = [ref.name for ref in generation.script.objects]
        anchors = match_names(names, scene, config.anchor_threshold)
        progressive = tuple(
            progressive_anchor_selection(
                generation.script, scene, threshold=config.anchor_threshold
            )
        )
    except NarravoError as exc:
        raise StageError("anchor", exc) from exc
    _write(out / "anchors.json", json.dumps(anchors.to_json(), indent=2) + "\n")

    provenance = {
        "template_version": TEMPLATE_VERSION,
        "template_hash": template_hash(),
        "strategy": config.strategy.value,
        "model": generation.model,
        "fixture_key": generation.fixture_key,
        "config_digest": config.digest(),
        "elapsed_s": generation.elapsed_s,
        "repaired": generation.repaired,
        "progressive_anchors": list(progressive),
    }
    _write(out / "provenance.json", json.dumps(provenance, indent=2) + "\n")

    return PipelineBundle(
        scene, generation.script, tree, anchors, report, generation, progressive, out
    )


# ---------------------------------------------------------------------------
# Batch evaluation
#
# Layout of an inputs directory:
#   <scenario>/positions.jsonl    {"true":[x,y,z],"detected":[x,y,z]}
#   <scenario>/occlusion.jsonl    {"tier":"T30","correct":true}
#   <scenario>/latency.jsonl      {"t_event":s,"t_response":s}
#   <scenario>/ratings.csv        rater,dimension,value,scale_max  (NBI rows)
#   <scenario>/lighting.json      {"ap_extreme":x,"ap_normal":y}
#   <scenario>/fragments.json     {"theme":[...],"fragments":[{"topic_tags":[...],"content_tags":[...]}]}
#   metaphor_ratings.csv          per-object MA/SEF/MD ratings (story column = object)
#   story_ratings.csv             per-story dimension ratings


@dataclass(frozen=True)
class BatchResult:
    cross_report: MetricReport
    per_scenario: dict[str, MetricReport]
    errors: list[tuple[str, str]]  # (file, message)


def _load_scenario(directory: Path, errors: list[tuple[str, str]]) -> ScenarioInputs:
    def attempt(filename: str, loader):
        file = directory / filename
        if not file.exists():
            return None
        try:
            return loader(file.read_text(encoding="utf-8"))
        except (NarravoError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            errors.append((str(file), str(exc)))
            return None

    positions = attempt("positions.jsonl", read_positions_jsonl)
    occlusion = attempt("occlusion.jsonl", read_occlusion_jsonl)
    latency_trace = attempt("latency.jsonl", read_latency_jsonl)
    ratings = attempt("ratings.csv", read_ratings_csv)
    nbi_scores = tuple(s for s in ratings if s.dimension == "NBI") if ratings else None

    def parse_lighting(text: str) -> tuple[float, float]:
        doc = json.loads(text)
        return float(doc["ap_extreme"]), float(doc["ap_normal"])

    lighting = attempt("lighting.json", parse_lighting)

    def parse_fragments(text: str):
        doc = json.loads(text)
        frags = tuple(
            (tuple(f.get("topic_tags", ())), tuple(f.get("content_tags", ())))
            for f in doc["fragments"]
        )
        return frags, tuple(doc.get("theme", ()))

    fragments = attempt("fragments.json", parse_fragments)

    return ScenarioInputs(
        name=directory.name,
        positions=positions if positions and positions.pairs else None,
        occlusion_trials=occlusion if occlusion else None,
        latency_trace=latency_trace if latency_trace and latency_trace.events else None,
        nbi_scores=nbi_scores if nbi_scores else None,
        lighting=lighting,
        fragment_tags=fragments[0] if fragments else None,
        theme=fragments[1] if fragments else None,
    )


def evaluate_batch(inputs_dir: str | Path, out_dir: str | Path) -> BatchResult:
    """Produce one report per scenario plus a cross-scenario report.

    A malformed input file is recorded as an error and skipped; the rest of
    the batch still evaluates. Scenario order (and therefore output) is
    name-sorted, independent of filesystem enumeration order.
    """
    inputs = Path(inputs_dir)
    out = Path(out_dir)
    if not inputs.is_dir():
        raise ValidationError(f"inputs directory {inputs} does not exist")
    errors: list[tuple[str, str]] = []

    scenario_dirs = sorted(d for d in inputs.iterdir() if d.is_dir())
    scenarios = [_load_scenario(d, errors) for d in scenario_dirs]
    scenarios = [
        s
        for s in scenarios
        if any(
            (s.positions, s.occlusion_trials, s.latency_trace, s.nbi_scores,
             s.lighting, s.fragment_tags)
        )
    ]

    def read_csv(filename: str):
        file = inputs / filename
        if not file.exists():
            return []
        try:
            return read_ratings_csv(file.read_text(encoding="utf-8"))
        except (NarravoError, OSError) as exc:
            errors.append((str(file), str(exc)))
            return []

    metaphor_ratings = read_csv("metaphor_ratings.csv")
    story_ratings = read_csv("story_ratings.csv")

    if not scenarios and not metaphor_ratings and not story_ratings:
        raise ValidationError(
            f"no usable metric inputs under {inputs} "
            f"({len(errors)} file error(s))" if errors else
            f"no metric inputs found under {inputs}"
        )

    per_scenario: dict[str, MetricReport] = {}
    for scenario in scenarios:
        report = build_report(scenarios=[scenario])
        per_scenario[scenario.name] = report
        _write(out / f"{scenario.name}.report.json",
               json.dumps(report.to_json(), indent=2) + "\n")
        _write(out / f"{scenario.name}.report.txt", report.render_text())

    cross = build_report(
        scenarios=scenarios,
        metaphor_ratings=metaphor_ratings,
        story_ratings=story_ratings,
    )
    _write(out / "cross_scenario.report.json", json.dumps(cross.to_json(), indent=2) + "\n")
    _write(out / "cross_scenario.report.txt", cross.render_text())
    if errors:
        _write(out / "errors.json", json.dumps(
            [{"file": f, "error": e} for f, e in errors], indent=2) + "\n")
    return BatchResult(cross, per_scenario, errors)
