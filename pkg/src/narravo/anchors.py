"""Bind VLM-emitted object names to tracked scene anchors.

Generated scripts rarely reuse the runtime's object naming verbatim
("console table" vs "table_console_01"), so binding is a deterministic
fuzzy match: exact normalized equality or token-set Jaccard after
lowercasing, splitting on whitespace/underscores/digits and singularizing
a trailing "s". Embedding-based matchers can be slotted in behind the same
contract later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .scene import SceneSnapshot
from .script import NarrativeScript

DEFAULT_MATCH_THRESHOLD = 0.5
DEFAULT_PLACEMENT_TOLERANCE_M = 0.5

_SPLIT_RE = re.compile(r"[\s_\d]+")


def _tokens(text: str) -> frozenset[str]:
    parts = _SPLIT_RE.split(text.lower())
    out = set()
    for part in parts:
        if not part:
            continue
        if part.endswith("s") and len(part) > 2:
            part = part[:-1]
        out.add(part)
    return frozenset(out)


def name_match_score(narrative_name: str, scene_name: str) -> float:
    """Similarity in [0, 1]: 1.0 on exact normalized match, else token Jaccard."""
    if narrative_name.strip().lower() == scene_name.strip().lower():
        return 1.0
    left, right = _tokens(narrative_name), _tokens(scene_name)
    union = left | right
    if not union:
        return 0.0
    return len(left & right) / len(union)


@dataclass(frozen=True)
class AnchorBinding:
    name: str  # narrative-side name
    object_id: str  # scene object id
    score: float
    position: tuple[float, float, float]


@dataclass(frozen=True)
class MatchResult:
    """Scored candidates for one narrative name, for inspection and debug
    surfaces; `chosen` is what greedy assignment would pick in isolation."""

    name: str
    candidates: tuple[tuple[str, float], ...]  # (scene id, score), best first
    chosen: AnchorBinding | None


@dataclass(frozen=True)
class AnchorTable:
    bindings: tuple[AnchorBinding, ...]
    unbound: tuple[str, ...]

    def binding_for(self, name: str) -> AnchorBinding | None:
        for binding in self.bindings:
            if binding.name == name:
                return binding
        return None

    def name_for_id(self, object_id: str) -> str | None:
        for binding in self.bindings:
            if binding.object_id == object_id:
                return binding.name
        return None

    def to_json(self) -> dict:
        return {
            "bindings": [
                {
                    "name": b.name,
                    "id": b.object_id,
                    "score": b.score,
                    "position": list(b.position),
                }
                for b in self.bindings
            ],
            "unbound": list(self.unbound),
        }

    @staticmethod
    def empty() -> "AnchorTable":
        return AnchorTable((), ())


def score_candidates(
    name: str,
    scene: SceneSnapshot,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> MatchResult:
    """All scene objects scoring at or above the threshold for one name."""
    scored = sorted(
        (
            (obj.id, name_match_score(name, obj.name))
            for obj in scene.objects
            if name_match_score(name, obj.name) >= threshold
        ),
        key=lambda c: (-c[1], c[0]),
    )
    chosen = None
    if scored:
        best_id, best_score = scored[0]
        best = next(o for o in scene.objects if o.id == best_id)
        chosen = AnchorBinding(name, best_id, best_score, best.pose.position)
    return MatchResult(name, tuple(scored), chosen)


def match_names(
    narrative_names: list[str],
    scene: SceneSnapshot,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> AnchorTable:
    """Greedy one-to-one assignment by descending score; ties broken by
    narrative name, then lexicographic scene id. Names that match nothing at
    or above the threshold land in ``unbound``.
    """
    if not scene.objects:
        raise ValueError("cannot match against an empty scene")
    ordered_names = list(dict.fromkeys(narrative_names))  # dedupe, keep order
    candidates = []
    for name in ordered_names:
        for obj in scene.objects:
            score = name_match_score(name, obj.name)
            if score >= threshold:
                candidates.append((score, name, obj))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2].id))
    bound: dict[str, AnchorBinding] = {}
    used_ids: set[str] = set()
    for score, name, obj in candidates:
        if name in bound or obj.id in used_ids:
            continue
        bound[name] = AnchorBinding(name, obj.id, score, obj.pose.position)
        used_ids.add(obj.id)
    bindings = tuple(bound[n] for n in ordered_names if n in bound)
    unbound = tuple(n for n in ordered_names if n not in bound)
    return AnchorTable(bindings, unbound)


@dataclass(frozen=True)
class SpatialViolation:
    name: str
    distance: float
    tolerance: float
    anchor_position: tuple[float, float, float]
    proposed_position: tuple[float, float, float]


def spatial_consistency_check(
    table: AnchorTable,
    placements: list[tuple[str, tuple[float, float, float]]],
    tolerance: float = DEFAULT_PLACEMENT_TOLERANCE_M,
) -> list[SpatialViolation]:
    """One violation per placement farther than `tolerance` from its anchor."""
    violations = []
    for name, proposed in placements:
        binding = table.binding_for(name)
        if binding is None:
            raise ValidationError(f"placement references unbound name {name!r}")
        distance = float(
            np.linalg.norm(np.asarray(proposed, dtype=float) - np.asarray(binding.position))
        )
        if distance > tolerance:
            violations.append(
                SpatialViolation(name, distance, tolerance, binding.position, tuple(proposed))
            )
    return violations


def progressive_anchor_selection(
    script: NarrativeScript,
    scene: SceneSnapshot,
    k: int = 2,
    threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> list[str]:
    """Pick the <= k objects to anchor first: metaphor-bearing objects ranked
    by metaphorical weight, then by how many fragments hinge on them.

    The ranking is prefix-stable: increasing k extends the list without
    reordering it.
    """
    table = match_names([ref.name for ref in script.objects], scene, threshold)
    core_counts: dict[str, int] = {}
    for frag in script.fragments:
        core_counts[frag.core_object] = core_counts.get(frag.core_object, 0) + 1

    def rank(ref) -> tuple:
        scene_meta = None
        binding = table.binding_for(ref.name)
        if binding is not None:
            obj = scene.get(binding.object_id)
            if obj is not None:
                scene_meta = obj.semantics.metaphorical
        has_metaphor = ref.metaphor is not None or scene_meta is not None
        if scene_meta is not None:
            weight = scene_meta.weight
        elif ref.metaphor is not None:
            weight = 0.5
        else:
            weight = 0.0
        count = core_counts.get(ref.name, 0)
        return (-int(has_metaphor), -weight, -count, ref.name)

    ranked = sorted(script.objects, key=rank)
    return [ref.name for ref in ranked[: max(k, 0)]]
