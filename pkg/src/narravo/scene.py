"""State-aware scene model: objects with layered semantics plus the geometric
primitives (projected-rectangle occlusion, state diffs) consumed by the rest
of the pipeline.

Conventions: metres, right-handed coordinates, y-up. Object boxes are
axis-aligned in world space, centred on the object position; the orientation
quaternion is carried for downstream consumers but does not rotate the box.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

# Centroid movement below this is treated as tracking jitter, not a move.
MOVE_THRESHOLD_M = 0.05

_QUAT_NORM_TOL = 1e-6
_MIN_DEPTH = 1e-9


class SceneParseError(ParseError):
    """Scene document is malformed."""


class SceneValidationError(ValidationError):
    """Scene document parsed but violates an invariant (e.g. duplicate id)."""


class DegenerateProjectionError(ValidationError):
    """Viewpoint and target coincide (or the projection collapses)."""


class OcclusionTier(enum.Enum):
    """The three-step progressive occlusion protocol."""

    T30 = 0.30
    T60 = 0.60
    T90 = 0.90

    @property
    def fraction(self) -> float:
        return self.value


def _check_vec(values: Sequence[float], length: int, what: str) -> tuple[float, ...]:
    vec = tuple(float(v) for v in values)
    if len(vec) != length:
        raise ValueError(f"{what} must have {length} components, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise ValueError(f"{what} components must be finite: {vec}")
    return vec


@dataclass(frozen=True)
class Pose:
    """Position in metres plus a unit quaternion (w, x, y, z)."""

    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", _check_vec(self.position, 3, "position"))
        quat = _check_vec(self.orientation, 4, "orientation")
        norm = math.sqrt(sum(c * c for c in quat))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise ValueError(f"orientation must be a unit quaternion; norm={norm:.9f}")
        object.__setattr__(self, "orientation", quat)


@dataclass(frozen=True)
class Metaphor:
    """Symbolic descriptor with a salience weight in [0, 1]."""

    text: str
    weight: float = 0.5

    def __post_init__(self):
        if not self.text:
            raise ValueError("metaphor text must be non-empty")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"metaphor weight must be in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class SemanticLayers:
    """Physical, functional and (optional) metaphorical descriptors."""

    physical: str
    functional: str
    metaphorical: Metaphor | None = None

    def __post_init__(self):
        if not self.physical:
            raise ValueError("physical descriptor must be non-empty")
        if not self.functional:
            raise ValueError("functional descriptor must be non-empty")


#: Labels with built-in meaning; any other non-empty label is a custom tag.
KNOWN_STATE_LABELS = frozenset({"intact", "damaged", "displaced", "hidden"})


@dataclass(frozen=True)
class ObjectState:
    label: str = "intact"
    note: str = ""

    def __post_init__(self):
        if not self.label:
            raise ValueError("state label must be non-empty")

    @property
    def is_custom(self) -> bool:
        return self.label not in KNOWN_STATE_LABELS


@dataclass(frozen=True)
class SceneObject:
    id: str
    name: str
    pose: Pose
    bbox: tuple[float, float, float]
    state: ObjectState = ObjectState()
    semantics: SemanticLayers = SemanticLayers("unspecified", "unspecified")

    def __post_init__(self):
        if not self.id:
            raise ValueError("object id must be non-empty")
        if not self.name:
            raise ValueError("object name must be non-empty")
        extents = _check_vec(self.bbox, 3, "bbox")
        if any(e <= 0.0 for e in extents):
            raise ValueError(f"bbox extents must be strictly positive: {extents}")
        object.__setattr__(self, "bbox", extents)

    def corners(self) -> np.ndarray:
        """The 8 world-space corners of the axis-aligned box, shape (8, 3)."""
        centre = np.asarray(self.pose.position)
        half = np.asarray(self.bbox) / 2.0
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return centre + signs * half


@dataclass(frozen=True)
class SceneSnapshot:
    scene_id: str
    objects: tuple[SceneObject, ...]
    viewpoint: Pose = Pose()
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.timestamp < 0.0:
            raise ValueError("timestamp must be non-negative")
        seen: set[str] = set()
        for obj in self.objects:
            if obj.id in seen:
                raise SceneValidationError(f"duplicate object id: {obj.id!r}")
            seen.add(obj.id)

    def get(self, object_id: str) -> SceneObject | None:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        return None


@dataclass(frozen=True)
class StateChange:
    """One row of a scene diff; `displacement` is None for added/removed."""

    object_id: str
    kind: str  # "changed" | "added" | "removed"
    old_state: ObjectState | None = None
    new_state: ObjectState | None = None
    displacement: float | None = None


# ---------------------------------------------------------------------------
# Scene file format


def _get(mapping: Any, key: str, path: str, required: bool = True) -> Any:
    if not isinstance(mapping, dict):
        raise SceneParseError(f"expected an object, got {type(mapping).__name__}", path)
    if key not in mapping:
        if required:
            raise SceneParseError(f"missing required field {key!r}", path)
        return None
    return mapping[key]


def _parse_pose(raw: Any, path: str) -> Pose:
    position = _get(raw, "position", path)
    orientation = _get(raw, "orientation", path, required=False)
    try:
        return Pose(
            tuple(position),
            tuple(orientation) if orientation is not None else (1.0, 0.0, 0.0, 0.0),
        )
    except (TypeError, ValueError) as exc:
        raise SceneParseError(str(exc), path) from exc


def _parse_object(raw: Any, path: str) -> SceneObject:
    state_raw = _get(raw, "state", path, required=False)
    semantics_raw = _get(raw, "semantics", path, required=False)
    try:
        state = ObjectState()
        if state_raw is not None:
            state = ObjectState(
                label=_get(state_raw, "label", f"{path}.state"),
                note=str(state_raw.get("note", "")),
            )
        semantics = SemanticLayers("unspecified", "unspecified")
        if semantics_raw is not None:
            meta_raw = semantics_raw.get("metaphorical")
            metaphor = None
            if meta_raw is not None:
                metaphor = Metaphor(
                    text=_get(meta_raw, "text", f"{path}.semantics.metaphorical"),
                    weight=float(meta_raw.get("weight", 0.5)),
                )
            semantics = SemanticLayers(
                physical=_get(semantics_raw, "physical", f"{path}.semantics"),
                functional=_get(semantics_raw, "functional", f"{path}.semantics"),
                metaphorical=metaphor,
            )
        return SceneObject(
            id=_get(raw, "id", path),
            name=_get(raw, "name", path),
            pose=_parse_pose(_get(raw, "pose", path), f"{path}.pose"),
            bbox=tuple(_get(raw, "bbox", path)),
            state=state,
            semantics=semantics,
        )
    except SceneParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise SceneParseError(str(exc), path) from exc


def load_scene(document: str | bytes | dict) -> SceneSnapshot:
    """Parse a scene file into a snapshot, preserving object order.

    Raises :class:`SceneParseError` (with a field path) on malformed input and
    :class:`SceneValidationError` on duplicate object ids.
    """
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SceneParseError(
                f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}"
            ) from exc
    else:
        raw = document
    scene_id = _get(raw, "scene_id", "$")
    viewpoint_raw = _get(raw, "viewpoint", "$", required=False)
    viewpoint = _parse_pose(viewpoint_raw, "$.viewpoint") if viewpoint_raw else Pose()
    objects_raw = _get(raw, "objects", "$")
    if not isinstance(objects_raw, list):
        raise SceneParseError("'objects' must be a list", "$.objects")
    objects = [
        _parse_object(obj, f"$.objects[{i}]") for i, obj in enumerate(objects_raw)
    ]
    try:
        timestamp = float(raw.get("timestamp", 0.0))
        return SceneSnapshot(scene_id, tuple(objects), viewpoint, timestamp)
    except SceneValidationError:
        raise
    except (TypeError, ValueError) as exc:
        raise SceneParseError(str(exc), "$") from exc


def _pose_to_json(pose: Pose) -> dict:
    return {"position": list(pose.position), "orientation": list(pose.orientation)}


def scene_to_json(snapshot: SceneSnapshot) -> dict:
    objects = []
    for obj in snapshot.objects:
        semantics: dict[str, Any] = {
            "physical": obj.semantics.physical,
            "functional": obj.semantics.functional,
        }
        if obj.semantics.metaphorical is not None:
            semantics["metaphorical"] = {
                "text": obj.semantics.metaphorical.text,
                "weight": obj.semantics.metaphorical.weight,
            }
        objects.append(
            {
                "id": obj.id,
                "name": obj.name,
                "pose": _pose_to_json(obj.pose),
                "bbox": list(obj.bbox),
                "state": {"label": obj.state.label, "note": obj.state.note},
                "semantics": semantics,
            }
        )
    return {
        "scene_id": snapshot.scene_id,
        "timestamp": snapshot.timestamp,
        "viewpoint": _pose_to_json(snapshot.viewpoint),
        "objects": objects,
    }


def serialize_scene(snapshot: SceneSnapshot) -> str:
    """Inverse of :func:`load_scene`; deterministic key order."""
    return json.dumps(scene_to_json(snapshot), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Projected-rectangle occlusion


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    up = np.array([0.0, 1.0, 0.0])
    if abs(float(np.dot(up, normal))) > 0.9:
        up = np.array([1.0, 0.0, 0.0])
    u_axis = np.cross(up, normal)
    u_axis /= np.linalg.norm(u_axis)
    w_axis = np.cross(normal, u_axis)
    return u_axis, w_axis


@dataclass(frozen=True)
class _ViewFrame:
    origin: np.ndarray  # viewpoint position
    normal: np.ndarray  # unit view ray towards the target centroid
    depth: float  # distance from viewpoint to the target plane
    u_axis: np.ndarray
    w_axis: np.ndarray
    centre: np.ndarray  # target centroid = plane origin


def _view_frame(target: SceneObject, viewpoint: Pose) -> _ViewFrame:
    origin = np.asarray(viewpoint.position, dtype=float)
    centre = np.asarray(target.pose.position, dtype=float)
    offset = centre - origin
    depth = float(np.linalg.norm(offset))
    if depth < _MIN_DEPTH:
        raise DegenerateProjectionError(
            "viewpoint coincides with the target centroid"
        )
    normal = offset / depth
    u_axis, w_axis = _plane_basis(normal)
    return _ViewFrame(origin, normal, depth, u_axis, w_axis, centre)


def _project_rect(frame: _ViewFrame, corners: np.ndarray) -> tuple[float, float, float, float] | None:
    """Perspective-project box corners onto the target plane; return the
    bounding rectangle in plane coordinates, or None when the box straddles
    the viewpoint (it then cannot be projected meaningfully)."""
    rel = corners - frame.origin
    depths = rel @ frame.normal
    if np.any(depths <= _MIN_DEPTH):
        return None
    scaled = rel * (frame.depth / depths)[:, None]
    planar = scaled + frame.origin - frame.centre
    us = planar @ frame.u_axis
    ws = planar @ frame.w_axis
    return float(us.min()), float(us.max()), float(ws.min()), float(ws.max())


def _covered_fraction(
    target_rect: tuple[float, float, float, float],
    cover_rects: list[tuple[float, float, float, float]],
) -> float:
    u0, u1, w0, w1 = target_rect
    area = (u1 - u0) * (w1 - w0)
    if area <= 0.0:
        raise DegenerateProjectionError("target projects to a zero-area rectangle")
    clipped = []
    for a0, a1, b0, b1 in cover_rects:
        c = (max(a0, u0), min(a1, u1), max(b0, w0), min(b1, w1))
        if c[1] > c[0] and c[3] > c[2]:
            clipped.append(c)
    if not clipped:
        return 0.0
    # Exact union area via coordinate compression: rectangle edges become
    # grid lines, so marking whole cells is exact, not an approximation.
    us = np.array(sorted({u0, u1, *(r[0] for r in clipped), *(r[1] for r in clipped)}))
    ws = np.array(sorted({w0, w1, *(r[2] for r in clipped), *(r[3] for r in clipped)}))
    covered = np.zeros((len(us) - 1, len(ws) - 1), dtype=bool)
    for a0, a1, b0, b1 in clipped:
        i0, i1 = np.searchsorted(us, (a0, a1))
        j0, j1 = np.searchsorted(ws, (b0, b1))
        covered[i0:i1, j0:j1] = True
    cell_areas = np.outer(np.diff(us), np.diff(ws))
    return min(1.0, max(0.0, float(cell_areas[covered].sum()) / area))


_CORNER_SIGNS = np.array(
    [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
    dtype=float,
)


def occlusion_fraction(
    target: SceneObject, viewpoint: Pose, occluders: Iterable[SceneObject]
) -> float:
    """Fraction of the target's projected bounding rectangle covered by the
    occluders' projected rectangles, in [0, 1].

    Projection plane: perpendicular to the view ray at the target centroid.
    Only occluders whose centroid lies strictly between the viewpoint and
    that plane can block; others contribute nothing.
    """
    occluders = list(occluders)
    if any(o.id == target.id for o in occluders):
        raise ValueError("target must not appear in the occluder list")
    frame = _view_frame(target, viewpoint)
    target_rect = _project_rect(frame, target.corners())
    if target_rect is None:
        raise DegenerateProjectionError("target box straddles the viewpoint")
    if not occluders:
        return 0.0
    centres = np.array([o.pose.position for o in occluders])
    halves = np.array([o.bbox for o in occluders]) / 2.0
    return _covered_fraction(target_rect, _project_boxes(frame, centres, halves))


def _project_boxes(
    frame: _ViewFrame, centres: np.ndarray, halves: np.ndarray
) -> list[tuple[float, float, float, float]]:
    """Projected rectangles of the boxes that can actually block: centroid
    strictly between the viewpoint and the target plane, fully in front."""
    corners = centres[:, None, :] + _CORNER_SIGNS[None, :, :] * halves[:, None, :]
    rel = corners - frame.origin  # (k, 8, 3)
    depths = rel @ frame.normal  # (k, 8)
    centroid_depths = (centres - frame.origin) @ frame.normal
    usable = (
        (centroid_depths > _MIN_DEPTH)
        & (centroid_depths < frame.depth)
        & (depths > _MIN_DEPTH).all(axis=1)
    )
    if not usable.any():
        return []
    rel = rel[usable]
    depths = depths[usable]
    scaled = rel * (frame.depth / depths)[:, :, None]
    planar = scaled + (frame.origin - frame.centre)
    us = planar @ frame.u_axis
    ws = planar @ frame.w_axis
    return [
        (float(u.min()), float(u.max()), float(w.min()), float(w.max()))
        for u, w in zip(us, ws)
    ]


# Grid used to assemble synthetic occluders. Small cells keep the
# world-AABB of each piece close to its intended quad under oblique views.
_TIER_COLS = 16
_TIER_ROWS = 12


def _tier_boxes(
    frame: _ViewFrame,
    target_rect: tuple[float, float, float, float],
    span: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Box (centres, halves) halfway to the target covering the left `span`
    fraction of its projected rectangle, full height plus a margin.

    Each grid cell's four corners are pulled to the midway plane, where they
    all share depth d/2 and so project back exactly onto the cell; taking the
    world AABB per small cell keeps the projection slack tiny even for
    oblique view rays. Growing `span` only grows the union, so coverage is
    monotone in `span` and can be bisected.
    """
    u0, u1, w0, w1 = target_rect
    margin = 0.05 * (w1 - w0)
    w_edges = np.linspace(w0 - margin, w1 + margin, _TIER_ROWS + 1)
    col_width = (u1 - u0) / _TIER_COLS
    u_right = u0 + span * (u1 - u0)
    cells = []
    for col in range(_TIER_COLS):
        left = u0 + col * col_width
        if left >= u_right:
            break
        right = min(left + col_width, u_right)
        if right - left < 1e-12:
            continue
        for row in range(_TIER_ROWS):
            cells.append((left, right, float(w_edges[row]), float(w_edges[row + 1])))
    if not cells:
        return np.empty((0, 3)), np.empty((0, 3))
    rects = np.array(cells)  # (k, 4): u_lo, u_hi, w_lo, w_hi
    corners_uw = np.stack(
        [
            rects[:, [0, 2]], rects[:, [0, 3]], rects[:, [1, 2]], rects[:, [1, 3]],
        ],
        axis=1,
    )  # (k, 4, 2)
    plane_pts = (
        frame.centre
        + corners_uw[:, :, 0:1] * frame.u_axis
        + corners_uw[:, :, 1:2] * frame.w_axis
    )
    midway = frame.origin + 0.5 * (plane_pts - frame.origin)
    low, high = midway.min(axis=1), midway.max(axis=1)
    halves = np.maximum((high - low) / 2.0, 1e-5)
    return (low + high) / 2.0, halves


def make_occlusion_tier(
    target: SceneObject, viewpoint: Pose, tier: OcclusionTier
) -> list[SceneObject]:
    """Build synthetic occluders hitting the tier's occlusion fraction.

    The covered span is bisected against the same projected-rectangle cover
    measure :func:`occlusion_fraction` uses, which lands well inside the
    protocol's +/-0.02 band for any target geometry.
    """
    frame = _view_frame(target, viewpoint)
    target_rect = _project_rect(frame, target.corners())
    if target_rect is None:
        raise DegenerateProjectionError("target box straddles the viewpoint")

    goal = tier.fraction
    lo, hi = 0.0, 1.0
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for _ in range(30):
        mid = (lo + hi) / 2.0
        centres, halves = _tier_boxes(frame, target_rect, mid)
        measured = _covered_fraction(
            target_rect, _project_boxes(frame, centres, halves)
        ) if len(centres) else 0.0
        error = abs(measured - goal)
        if best is None or error < best[0]:
            best = (error, centres, halves)
        if error <= 0.003:
            break
        if measured < goal:
            lo = mid
        else:
            hi = mid
    assert best is not None
    _, centres, halves = best
    return [
        SceneObject(
            id=f"synthetic_occluder_{tier.name.lower()}_{i:03d}",
            name=f"synthetic occluder {tier.name} {i:03d}",
            pose=Pose(tuple(centre)),
            bbox=tuple(half * 2.0),
            state=ObjectState("intact"),
            semantics=SemanticLayers("synthetic slab", "test occluder"),
        )
        for i, (centre, half) in enumerate(zip(centres, halves))
    ]


def diff_states(before: SceneSnapshot, after: SceneSnapshot) -> list[StateChange]:
    """Objects whose state label changed or whose centroid moved more than
    MOVE_THRESHOLD_M, plus added/removed entries for one-sided objects."""
    if before.scene_id != after.scene_id:
        raise SceneValidationError(
            f"snapshots describe different scenes: "
            f"{before.scene_id!r} vs {after.scene_id!r}"
        )
    before_by_id = {obj.id: obj for obj in before.objects}
    after_ids = {obj.id for obj in after.objects}
    changes: list[StateChange] = []
    for obj in after.objects:
        old = before_by_id.get(obj.id)
        if old is None:
            changes.append(StateChange(obj.id, "added", None, obj.state, None))
            continue
        displacement = float(
            np.linalg.norm(
                np.asarray(obj.pose.position) - np.asarray(old.pose.position)
            )
        )
        if old.state.label != obj.state.label or displacement > MOVE_THRESHOLD_M:
            changes.append(
                StateChange(obj.id, "changed", old.state, obj.state, displacement)
            )
    for obj in before.objects:
        if obj.id not in after_ids:
            changes.append(StateChange(obj.id, "removed", obj.state, None, None))
    return changes
