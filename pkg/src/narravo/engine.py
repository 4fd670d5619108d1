"""Interactive session runtime over a linked story tree.

Sessions are event-sourced: the ordered event log is the source of truth and
any state can be rebuilt by replaying it. Applying an event returns a new
immutable state, so snapshots can be shared freely across threads; a session
has one writer by construction.

Trigger satisfaction is monotone in the log (scans accumulate, activations
never retract), which makes replay fully deterministic: identical event
sequences produce identical activation orders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable

from .anchors import AnchorTable
from .errors import ValidationError
from .script import Fragment, StoryTree, TriggerCondition

EVENT_KINDS = ("scan", "proximity", "view_start", "view_end", "advance")


class EventOrderingError(ValidationError):
    """Event timestamps must be non-decreasing within a session."""


@dataclass(frozen=True)
class SessionEvent:
    t: float
    kind: str
    object: str | None = None  # scan / proximity
    distance: float | None = None  # proximity
    fragment: str | None = None  # view_start / view_end

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.t < 0:
            raise ValidationError("event timestamp must be non-negative")
        if self.kind in ("scan", "proximity") and not self.object:
            raise ValidationError(f"{self.kind} event requires an object")
        if self.kind == "proximity" and (self.distance is None or self.distance < 0):
            raise ValidationError("proximity event requires a non-negative distance")
        if self.kind in ("view_start", "view_end") and not self.fragment:
            raise ValidationError(f"{self.kind} event requires a fragment")

    def to_json(self) -> dict:
        doc: dict = {"t": self.t, "kind": self.kind}
        if self.object is not None:
            doc["object"] = self.object
        if self.distance is not None:
            doc["distance"] = self.distance
        if self.fragment is not None:
            doc["fragment"] = self.fragment
        return doc

    @staticmethod
    def from_json(doc: dict) -> "SessionEvent":
        return SessionEvent(
            t=float(doc["t"]),
            kind=doc["kind"],
            object=doc.get("object"),
            distance=doc.get("distance"),
            fragment=doc.get("fragment"),
        )


@dataclass(frozen=True)
class SessionState:
    tree: StoryTree
    anchors: AnchorTable
    activated: tuple[str, ...] = ()
    current_beat: int = 0
    log: tuple[SessionEvent, ...] = ()
    view_durations: tuple[tuple[str, float], ...] = ()
    open_views: tuple[tuple[str, float], ...] = ()  # fragment -> start time
    path: tuple[str, ...] = ("beat:0",)
    warnings: tuple[str, ...] = ()

    def durations(self) -> dict[str, float]:
        return dict(self.view_durations)

    def scan_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for event in self.log:
            if event.kind == "scan" and event.object is not None:
                counts[event.object] = counts.get(event.object, 0) + 1
        return counts

    def last_timestamp(self) -> float:
        return self.log[-1].t if self.log else 0.0


@dataclass(frozen=True)
class TraversalLog:
    scan_counts: dict[str, int]
    activation_order: tuple[str, ...]
    view_durations: dict[str, float]
    path: tuple[str, ...]
    event_count: int
    warnings: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "scan_counts": dict(sorted(self.scan_counts.items())),
            "activation_order": list(self.activation_order),
            "view_durations": {k: v for k, v in sorted(self.view_durations.items())},
            "path": list(self.path),
            "event_count": self.event_count,
            "warnings": list(self.warnings),
        }


def start_session(tree: StoryTree, anchors: AnchorTable) -> SessionState:
    """Fresh state at beat 0 with an empty log."""
    if not tree.beats:
        raise ValidationError("cannot start a session on a tree with zero beats")
    return SessionState(tree=tree, anchors=anchors)


def _narrative_names_for(state: SessionState, event_object: str) -> set[str]:
    """Resolve an event's object field to narrative object names: direct name
    match plus whatever the anchor table binds that scene id to."""
    names = set()
    if any(ref.name == event_object for ref in state.tree.script.objects):
        names.add(event_object)
    bound = state.anchors.name_for_id(event_object)
    if bound is not None:
        names.add(bound)
    return names


def _scanned_names(state: SessionState) -> set[str]:
    names: set[str] = set()
    for event in state.log:
        if event.kind == "scan" and event.object:
            names |= _narrative_names_for(state, event.object)
    return names


def _proximity_best(state: SessionState) -> dict[str, float]:
    """Closest reported distance per narrative name over the whole log."""
    best: dict[str, float] = {}
    for event in state.log:
        if event.kind == "proximity" and event.object and event.distance is not None:
            for name in _narrative_names_for(state, event.object):
                if name not in best or event.distance < best[name]:
                    best[name] = event.distance
    return best


def _satisfied(
    trigger: TriggerCondition,
    scanned: set[str],
    proximity: dict[str, float],
    activated: set[str],
) -> bool:
    if trigger.kind == "scan":
        return trigger.object in scanned
    if trigger.kind == "proximity":
        best = proximity.get(trigger.object or "")
        return best is not None and trigger.radius is not None and best <= trigger.radius
    if trigger.kind == "after":
        return trigger.fragment in activated
    if trigger.kind == "all_of":
        return all(_satisfied(c, scanned, proximity, activated) for c in trigger.children)
    if trigger.kind == "any_of":
        return any(_satisfied(c, scanned, proximity, activated) for c in trigger.children)
    return False


def _beat_gating(state: SessionState, beat_index: int) -> list[Fragment]:
    beat = state.tree.beats[beat_index]
    involved = set(beat.involved_objects)
    return [f for f in state.tree.fragments if f.core_object in involved]


def _advance_ready_beats(state: SessionState) -> SessionState:
    """Auto-advance while every fragment tied to the current beat's involved
    objects is activated (beats with no gating fragments wait for an explicit
    advance event)."""
    activated = set(state.activated)
    beat, path = state.current_beat, state.path
    while beat < len(state.tree.beats) - 1:
        gating = _beat_gating(state, beat)
        if not gating or not all(f.name in activated for f in gating):
            break
        beat += 1
        path = path + (f"beat:{beat}",)
    if beat == state.current_beat:
        return state
    return replace(state, current_beat=beat, path=path)


def handle_event(
    state: SessionState, event: SessionEvent
) -> tuple[SessionState, list[str]]:
    """Append one event and fire every newly satisfied trigger.

    Fragments activate at most once, in declaration order; activating one can
    satisfy ``after`` conditions of others within the same call. Unknown
    object ids are logged with a warning rather than rejected.
    """
    if state.log and event.t < state.log[-1].t:
        raise EventOrderingError(
            f"event at t={event.t} precedes the last logged event "
            f"at t={state.log[-1].t}"
        )
    warnings = list(state.warnings)
    durations = dict(state.view_durations)
    open_views = dict(state.open_views)
    current_beat = state.current_beat
    path = state.path

    if event.kind in ("scan", "proximity"):
        if not _narrative_names_for(state, event.object or ""):
            warnings.append(f"unknown object {event.object!r} at t={event.t}")
    elif event.kind == "view_start":
        if state.tree.script.fragment(event.fragment or "") is None:
            warnings.append(f"view_start for unknown fragment {event.fragment!r}")
        elif event.fragment in open_views:
            warnings.append(f"view_start for already-open fragment {event.fragment!r}")
        else:
            open_views[event.fragment] = event.t
    elif event.kind == "view_end":
        started = open_views.pop(event.fragment or "", None)
        if started is None:
            warnings.append(f"view_end without view_start for {event.fragment!r}")
        else:
            durations[event.fragment] = durations.get(event.fragment, 0.0) + (
                event.t - started
            )
    elif event.kind == "advance":
        if current_beat < len(state.tree.beats) - 1:
            current_beat += 1
            path = path + (f"beat:{current_beat}",)
        else:
            warnings.append(f"advance past the final beat at t={event.t}")

    state = replace(
        state,
        log=state.log + (event,),
        view_durations=tuple(sorted(durations.items())),
        open_views=tuple(sorted(open_views.items())),
        current_beat=current_beat,
        path=path,
        warnings=tuple(warnings),
    )

    # Activation fixpoint: declaration order, each fragment at most once.
    scanned = _scanned_names(state)
    proximity = _proximity_best(state)
    activated = list(state.activated)
    active_set = set(activated)
    newly: list[str] = []
    changed = True
    while changed:
        changed = False
        for frag in state.tree.fragments:
            if frag.name in active_set:
                continue
            if _satisfied(frag.trigger, scanned, proximity, active_set):
                activated.append(frag.name)
                active_set.add(frag.name)
                newly.append(frag.name)
                changed = True
    if newly:
        state = replace(
            state,
            activated=tuple(activated),
            path=state.path + tuple(f"fragment:{n}" for n in newly),
        )
    state = _advance_ready_beats(state)
    return state, newly


def replay(tree: StoryTree, anchors: AnchorTable, events: Iterable[SessionEvent]) -> SessionState:
    """Rebuild a session state from its event log."""
    state = start_session(tree, anchors)
    for event in events:
        state, _ = handle_event(state, event)
    return state


def _describe_unmet(
    trigger: TriggerCondition,
    scanned: set[str],
    proximity: dict[str, float],
    activated: set[str],
) -> str:
    if _satisfied(trigger, scanned, proximity, activated):
        return "satisfied"
    if trigger.kind == "scan":
        return f"scan {trigger.object}"
    if trigger.kind == "proximity":
        return f"come within {trigger.radius} m of {trigger.object}"
    if trigger.kind == "after":
        return f"after fragment {trigger.fragment}"
    parts = [
        _describe_unmet(c, scanned, proximity, activated)
        for c in trigger.children
        if not _satisfied(c, scanned, proximity, activated)
    ]
    joiner = " and " if trigger.kind == "all_of" else " or "
    return "(" + joiner.join(parts) + ")" if len(parts) > 1 else parts[0]


def available_triggers(state: SessionState) -> list[tuple[str, str]]:
    """Non-activated fragments with a summary of what remains unmet,
    in declaration order."""
    scanned = _scanned_names(state)
    proximity = _proximity_best(state)
    active_set = set(state.activated)
    out = []
    for frag in state.tree.fragments:
        if frag.name in active_set:
            continue
        out.append(
            (frag.name, _describe_unmet(frag.trigger, scanned, proximity, active_set))
        )
    return out


def export_log(state: SessionState) -> TraversalLog:
    """Aggregate the raw log. A still-open view is closed at the last event
    timestamp and flagged, without mutating the session."""
    warnings = list(state.warnings)
    durations = dict(state.view_durations)
    last_t = state.last_timestamp()
    for fragment, started in state.open_views:
        durations[fragment] = durations.get(fragment, 0.0) + (last_t - started)
        warnings.append(f"view of {fragment!r} still open at export; closed at t={last_t}")
    return TraversalLog(
        scan_counts=state.scan_counts(),
        activation_order=state.activated,
        view_durations=durations,
        path=state.path,
        event_count=len(state.log),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# JSONL persistence


def events_to_jsonl(events: Iterable[SessionEvent]) -> str:
    return "".join(json.dumps(e.to_json()) + "\n" for e in events)


def events_from_jsonl(text: str) -> list[SessionEvent]:
    events = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            events.append(SessionEvent.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"bad event on line {i + 1}: {exc}") from exc
    return events
