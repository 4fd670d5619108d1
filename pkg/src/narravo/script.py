"""The structured interchange format between VLM output and the runtime.

A script document has three top-level sections (field names are contract):
``object`` (narrative items), ``mainstory`` (the linear spine) and
``fragments`` (trigger-gated branches). Parsing is lenient about unknown
fields (they are preserved and round-tripped); consistency problems are
reported as validation violations, not exceptions, because VLM output is
expected to be noisy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterator

from .errors import ParseError, ValidationError

ROLE_KEY = "key"
ROLE_BRANCHING = "branching"
_ROLES = (ROLE_KEY, ROLE_BRANCHING)

LEAF_KINDS = ("scan", "proximity", "after")
COMPOSITE_KINDS = ("all_of", "any_of")

#: Composites may nest one level of composites; leaves sit at depth 0.
MAX_TRIGGER_DEPTH = 2


class ScriptParseError(ParseError):
    """Interchange document is syntactically unusable."""


class ScriptValidationError(ValidationError):
    """Raised when an operation requires a script free of error violations."""

    def __init__(self, message: str, violations: list["Violation"] | None = None):
        self.violations = violations or []
        super().__init__(message)


@dataclass(frozen=True)
class ObjectRef:
    name: str
    role: str = ROLE_BRANCHING
    metaphor: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MainStoryBeat:
    index: int
    text: str
    involved_objects: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TriggerCondition:
    kind: str
    object: str | None = None
    radius: float | None = None
    fragment: str | None = None
    children: tuple["TriggerCondition", ...] = ()
    extra: dict = field(default_factory=dict)

    def leaves(self) -> Iterator["TriggerCondition"]:
        if self.kind in LEAF_KINDS:
            yield self
        for child in self.children:
            yield from child.leaves()

    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(child.depth() for child in self.children)

    @staticmethod
    def scan(object_name: str) -> "TriggerCondition":
        return TriggerCondition("scan", object=object_name)

    @staticmethod
    def proximity(object_name: str, radius: float) -> "TriggerCondition":
        return TriggerCondition("proximity", object=object_name, radius=radius)

    @staticmethod
    def after(fragment_name: str) -> "TriggerCondition":
        return TriggerCondition("after", fragment=fragment_name)

    @staticmethod
    def all_of(*children: "TriggerCondition") -> "TriggerCondition":
        return TriggerCondition("all_of", children=tuple(children))

    @staticmethod
    def any_of(*children: "TriggerCondition") -> "TriggerCondition":
        return TriggerCondition("any_of", children=tuple(children))


@dataclass(frozen=True)
class Fragment:
    name: str
    core_object: str
    content: str
    trigger: TriggerCondition
    topic: str = ""
    agents: tuple[str, ...] = ("user",)
    interaction_mode: str = ""
    symbolic_meaning: str = ""
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NarrativeScript:
    objects: tuple[ObjectRef, ...]
    mainstory: tuple[MainStoryBeat, ...]
    fragments: tuple[Fragment, ...] = ()
    extra: dict = field(default_factory=dict)

    def object_names(self) -> set[str]:
        return {ref.name for ref in self.objects}

    def fragment(self, name: str) -> Fragment | None:
        for frag in self.fragments:
            if frag.name == name:
                return frag
        return None


# ---------------------------------------------------------------------------
# Parsing

_OBJECT_KEYS = ("name", "role", "metaphor")
_BEAT_KEYS = ("index", "text", "involved_objects")
_FRAGMENT_KEYS = (
    "name",
    "topic",
    "core_object",
    "agents",
    "interaction_mode",
    "symbolic_meaning",
    "content",
    "triggerCondition",
)
_TRIGGER_KEYS = ("kind", "object", "radius", "fragment", "all_of", "any_of")


def _require(raw: Any, key: str, path: str) -> Any:
    if not isinstance(raw, dict):
        raise ScriptParseError(
            f"expected an object, got {type(raw).__name__}", path
        )
    if key not in raw:
        raise ScriptParseError(f"missing required field {key!r}", path)
    return raw[key]


def _string(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise ScriptParseError(
            f"expected a string, got {type(value).__name__}", path
        )
    return value


def _string_list(value: Any, path: str) -> tuple[str, ...]:
    if not isinstance(value, list):
        raise ScriptParseError(f"expected a list, got {type(value).__name__}", path)
    return tuple(_string(v, f"{path}[{i}]") for i, v in enumerate(value))


def _extras(raw: dict, known: tuple[str, ...]) -> dict:
    return {k: v for k, v in raw.items() if k not in known}


def _parse_trigger(raw: Any, path: str, depth: int = 0) -> TriggerCondition:
    kind = _string(_require(raw, "kind", path), f"{path}.kind")
    if kind in COMPOSITE_KINDS:
        if depth + 1 > MAX_TRIGGER_DEPTH:
            raise ScriptParseError(
                f"trigger nesting exceeds depth {MAX_TRIGGER_DEPTH}", path
            )
        children_raw = _require(raw, kind, path)
        if not isinstance(children_raw, list) or not children_raw:
            raise ScriptParseError(f"{kind!r} requires a non-empty list", f"{path}.{kind}")
        children = tuple(
            _parse_trigger(child, f"{path}.{kind}[{i}]", depth + 1)
            for i, child in enumerate(children_raw)
        )
        return TriggerCondition(kind, children=children, extra=_extras(raw, _TRIGGER_KEYS))
    if kind == "scan":
        return TriggerCondition(
            "scan",
            object=_string(_require(raw, "object", path), f"{path}.object"),
            extra=_extras(raw, _TRIGGER_KEYS),
        )
    if kind == "proximity":
        radius = _require(raw, "radius", path)
        if not isinstance(radius, (int, float)) or isinstance(radius, bool):
            raise ScriptParseError("radius must be a number", f"{path}.radius")
        return TriggerCondition(
            "proximity",
            object=_string(_require(raw, "object", path), f"{path}.object"),
            radius=float(radius),
            extra=_extras(raw, _TRIGGER_KEYS),
        )
    if kind == "after":
        return TriggerCondition(
            "after",
            fragment=_string(_require(raw, "fragment", path), f"{path}.fragment"),
            extra=_extras(raw, _TRIGGER_KEYS),
        )
    raise ScriptParseError(f"unknown trigger kind {kind!r}", f"{path}.kind")


def _parse_object_ref(raw: Any, path: str) -> ObjectRef:
    name = _string(_require(raw, "name", path), f"{path}.name")
    role = raw.get("role", ROLE_BRANCHING)
    if role not in _ROLES:
        raise ScriptParseError(f"role must be one of {_ROLES}, got {role!r}", f"{path}.role")
    metaphor = raw.get("metaphor")
    if metaphor is not None:
        metaphor = _string(metaphor, f"{path}.metaphor")
    return ObjectRef(name, role, metaphor, _extras(raw, _OBJECT_KEYS))


def _parse_beat(raw: Any, path: str) -> MainStoryBeat:
    index = _require(raw, "index", path)
    if not isinstance(index, int) or isinstance(index, bool):
        raise ScriptParseError("index must be an integer", f"{path}.index")
    text = _string(_require(raw, "text", path), f"{path}.text")
    involved = raw.get("involved_objects", [])
    return MainStoryBeat(
        index, text, _string_list(involved, f"{path}.involved_objects"),
        _extras(raw, _BEAT_KEYS),
    )


def _parse_fragment(raw: Any, path: str) -> Fragment:
    agents = raw.get("agents", ["user"])
    return Fragment(
        name=_string(_require(raw, "name", path), f"{path}.name"),
        core_object=_string(_require(raw, "core_object", path), f"{path}.core_object"),
        content=_string(_require(raw, "content", path), f"{path}.content"),
        trigger=_parse_trigger(
            _require(raw, "triggerCondition", path), f"{path}.triggerCondition"
        ),
        topic=_string(raw.get("topic", ""), f"{path}.topic"),
        agents=_string_list(agents, f"{path}.agents"),
        interaction_mode=_string(raw.get("interaction_mode", ""), f"{path}.interaction_mode"),
        symbolic_meaning=_string(raw.get("symbolic_meaning", ""), f"{path}.symbolic_meaning"),
        extra=_extras(raw, _FRAGMENT_KEYS),
    )


def parse_script(document: str | bytes | dict) -> NarrativeScript:
    """Parse an interchange document. No cross-reference checks happen here;
    run :func:`validate_script` on the result."""
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScriptParseError(
                f"invalid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}"
            ) from exc
    else:
        raw = document
    if not isinstance(raw, dict):
        raise ScriptParseError("top level must be a JSON object", "$")
    objects_raw = _require(raw, "object", "$")
    if not isinstance(objects_raw, list):
        raise ScriptParseError("'object' must be a list", "$.object")
    beats_raw = _require(raw, "mainstory", "$")
    if not isinstance(beats_raw, list):
        raise ScriptParseError("'mainstory' must be a list", "$.mainstory")
    fragments_raw = raw.get("fragments", [])
    if not isinstance(fragments_raw, list):
        raise ScriptParseError("'fragments' must be a list", "$.fragments")
    return NarrativeScript(
        objects=tuple(
            _parse_object_ref(o, f"$.object[{i}]") for i, o in enumerate(objects_raw)
        ),
        mainstory=tuple(
            _parse_beat(b, f"$.mainstory[{i}]") for i, b in enumerate(beats_raw)
        ),
        fragments=tuple(
            _parse_fragment(f, f"$.fragments[{i}]") for i, f in enumerate(fragments_raw)
        ),
        extra=_extras(raw, ("object", "mainstory", "fragments")),
    )


# ---------------------------------------------------------------------------
# Validation

SEVERITY_ERROR = "error"
SEVERITY_WARNING = "warning"

EMPTY_MAINSTORY = "EMPTY_MAINSTORY"
NONCONTIGUOUS_BEAT_INDICES = "NONCONTIGUOUS_BEAT_INDICES"
EMPTY_TEXT = "EMPTY_TEXT"
DUPLICATE_FRAGMENT_NAME = "DUPLICATE_FRAGMENT_NAME"
DUPLICATE_OBJECT_NAME = "DUPLICATE_OBJECT_NAME"
UNRESOLVED_CORE_OBJECT = "UNRESOLVED_CORE_OBJECT"
UNRESOLVED_TRIGGER_REF = "UNRESOLVED_TRIGGER_REF"
UNRESOLVED_INVOLVED_OBJECT = "UNRESOLVED_INVOLVED_OBJECT"
INVALID_TRIGGER = "INVALID_TRIGGER"
CYCLE_IN_AFTER_EDGES = "CYCLE_IN_AFTER_EDGES"
ORPHAN_FRAGMENT = "ORPHAN_FRAGMENT"

#: All violation codes validate_script can emit, with their severity.
VIOLATION_SEVERITIES = {
    EMPTY_MAINSTORY: SEVERITY_ERROR,
    NONCONTIGUOUS_BEAT_INDICES: SEVERITY_ERROR,
    EMPTY_TEXT: SEVERITY_ERROR,
    DUPLICATE_FRAGMENT_NAME: SEVERITY_ERROR,
    DUPLICATE_OBJECT_NAME: SEVERITY_WARNING,
    UNRESOLVED_CORE_OBJECT: SEVERITY_ERROR,
    UNRESOLVED_TRIGGER_REF: SEVERITY_ERROR,
    UNRESOLVED_INVOLVED_OBJECT: SEVERITY_WARNING,
    INVALID_TRIGGER: SEVERITY_ERROR,
    CYCLE_IN_AFTER_EDGES: SEVERITY_ERROR,
    ORPHAN_FRAGMENT: SEVERITY_WARNING,
}


@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str

    @property
    def severity(self) -> str:
        return VIOLATION_SEVERITIES[self.code]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def errors(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == SEVERITY_ERROR)

    @property
    def warnings(self) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.severity == SEVERITY_WARNING)

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _after_edges(script: NarrativeScript) -> list[tuple[str, str]]:
    """(parent, child) pairs: child's trigger mentions after(parent)."""
    edges = []
    for frag in script.fragments:
        for leaf in frag.trigger.leaves():
            if leaf.kind == "after" and leaf.fragment is not None:
                edges.append((leaf.fragment, frag.name))
    return edges


def _find_cycle(names: list[str], edges: list[tuple[str, str]]) -> list[str] | None:
    """First cycle (in declaration order) among after-edges, or None."""
    children: dict[str, list[str]] = {n: [] for n in names}
    for parent, child in edges:
        if parent in children and child in children:
            children[parent].append(child)
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {n: WHITE for n in names}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        colour[node] = GREY
        stack.append(node)
        for nxt in children[node]:
            if colour[nxt] == GREY:
                return stack[stack.index(nxt):]
            if colour[nxt] == WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        colour[node] = BLACK
        return None

    for name in names:
        if colour[name] == WHITE:
            found = visit(name)
            if found:
                return found
            stack.clear()
    return None


def _reachable_fragments(script: NarrativeScript) -> set[str]:
    """Fixpoint of fragments activatable assuming every scan/proximity event
    can occur; after(x) requires x to be activatable first."""

    def satisfiable(trigger: TriggerCondition, active: set[str]) -> bool:
        if trigger.kind in ("scan", "proximity"):
            return True
        if trigger.kind == "after":
            return trigger.fragment in active
        if trigger.kind == "all_of":
            return all(satisfiable(c, active) for c in trigger.children)
        if trigger.kind == "any_of":
            return any(satisfiable(c, active) for c in trigger.children)
        return False

    reachable: set[str] = set()
    changed = True
    while changed:
        changed = False
        for frag in script.fragments:
            if frag.name not in reachable and satisfiable(frag.trigger, reachable):
                reachable.add(frag.name)
                changed = True
    return reachable


def validate_script(script: NarrativeScript) -> ValidationReport:
    """Check every script invariant; always returns a report, never raises."""
    violations: list[Violation] = []

    def add(code: str, path: str, message: str):
        violations.append(Violation(code, path, message))

    names_seen: set[str] = set()
    for i, ref in enumerate(script.objects):
        if not ref.name:
            add(EMPTY_TEXT, f"$.object[{i}].name", "object name is empty")
        elif ref.name in names_seen:
            add(DUPLICATE_OBJECT_NAME, f"$.object[{i}].name",
                f"object name {ref.name!r} declared more than once")
        names_seen.add(ref.name)
    object_names = script.object_names()

    if not script.mainstory:
        add(EMPTY_MAINSTORY, "$.mainstory", "mainstory must contain at least one beat")
    else:
        indices = [beat.index for beat in script.mainstory]
        if indices != list(range(len(indices))):
            add(NONCONTIGUOUS_BEAT_INDICES, "$.mainstory",
                f"beat indices must be 0..{len(indices) - 1}, got {indices}")
        for i, beat in enumerate(script.mainstory):
            if not beat.text:
                add(EMPTY_TEXT, f"$.mainstory[{i}].text", "beat text is empty")
            for j, name in enumerate(beat.involved_objects):
                if name not in object_names:
                    add(UNRESOLVED_INVOLVED_OBJECT,
                        f"$.mainstory[{i}].involved_objects[{j}]",
                        f"{name!r} is not a declared object")

    fragment_names = [frag.name for frag in script.fragments]
    declared = set(fragment_names)
    seen: set[str] = set()
    for i, frag in enumerate(script.fragments):
        path = f"$.fragments[{i}]"
        if frag.name in seen:
            add(DUPLICATE_FRAGMENT_NAME, f"{path}.name",
                f"fragment name {frag.name!r} declared more than once")
        seen.add(frag.name)
        if not frag.content:
            add(EMPTY_TEXT, f"{path}.content", "fragment content is empty")
        if frag.core_object not in object_names:
            add(UNRESOLVED_CORE_OBJECT, f"{path}.core_object",
                f"core object {frag.core_object!r} is not a declared object")
        for leaf in frag.trigger.leaves():
            if leaf.kind in ("scan", "proximity"):
                if not leaf.object:
                    add(INVALID_TRIGGER, f"{path}.triggerCondition",
                        f"{leaf.kind} trigger with empty object name")
                elif leaf.object not in object_names:
                    add(UNRESOLVED_TRIGGER_REF, f"{path}.triggerCondition",
                        f"trigger references unknown object {leaf.object!r}")
                if leaf.kind == "proximity" and (leaf.radius is None or leaf.radius <= 0):
                    add(INVALID_TRIGGER, f"{path}.triggerCondition",
                        f"proximity radius must be > 0, got {leaf.radius}")
            elif leaf.kind == "after":
                if leaf.fragment not in declared:
                    add(UNRESOLVED_TRIGGER_REF, f"{path}.triggerCondition",
                        f"trigger references unknown fragment {leaf.fragment!r}")

    cycle = _find_cycle(fragment_names, _after_edges(script))
    if cycle:
        add(CYCLE_IN_AFTER_EDGES, "$.fragments",
            "after-edges form a cycle: " + " -> ".join(cycle + cycle[:1]))
        in_cycle = set(cycle)
    else:
        in_cycle = set()

    reachable = _reachable_fragments(script)
    for i, frag in enumerate(script.fragments):
        if frag.name not in reachable and frag.name not in in_cycle:
            add(ORPHAN_FRAGMENT, f"$.fragments[{i}]",
                f"fragment {frag.name!r} can never be reached from the mainstory")

    return ValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Story tree

@dataclass(frozen=True)
class StoryTree:
    """Linked traversal structure: the mainstory spine plus fragments wired
    to it directly (scan/proximity) or through after-edges."""

    script: NarrativeScript
    root_fragments: tuple[str, ...]  # fragments with a world-event leaf
    after_edges: tuple[tuple[str, str], ...]  # (parent, child)
    orphans: tuple[str, ...]

    @property
    def beats(self) -> tuple[MainStoryBeat, ...]:
        return self.script.mainstory

    @property
    def fragments(self) -> tuple[Fragment, ...]:
        return self.script.fragments


def link_story_tree(script: NarrativeScript) -> StoryTree:
    """Attach every fragment to the tree. Requires a script with no
    error-severity violations; cycles raise with the offending cycle listed."""
    report = validate_script(script)
    if report.errors:
        codes = sorted({v.code for v in report.errors})
        raise ScriptValidationError(
            f"script has validation errors: {', '.join(codes)}",
            list(report.violations),
        )
    root = tuple(
        frag.name
        for frag in script.fragments
        if any(leaf.kind in ("scan", "proximity") for leaf in frag.trigger.leaves())
    )
    declaration_rank = {frag.name: i for i, frag in enumerate(script.fragments)}
    edges = sorted(
        set(_after_edges(script)),
        key=lambda e: (declaration_rank[e[1]], declaration_rank[e[0]]),
    )
    orphans = tuple(
        frag.name
        for frag in script.fragments
        if frag.name not in _reachable_fragments(script)
    )
    return StoryTree(script, root, tuple(edges), orphans)


# ---------------------------------------------------------------------------
# Serialization


def _trigger_to_json(trigger: TriggerCondition) -> dict:
    doc: dict[str, Any] = {"kind": trigger.kind}
    if trigger.kind == "scan":
        doc["object"] = trigger.object
    elif trigger.kind == "proximity":
        doc["object"] = trigger.object
        doc["radius"] = trigger.radius
    elif trigger.kind == "after":
        doc["fragment"] = trigger.fragment
    else:
        doc[trigger.kind] = [_trigger_to_json(c) for c in trigger.children]
    for key in sorted(trigger.extra):
        doc[key] = trigger.extra[key]
    return doc


def script_to_json(script: NarrativeScript) -> dict:
    objects = []
    for ref in script.objects:
        doc: dict[str, Any] = {"name": ref.name, "role": ref.role}
        if ref.metaphor is not None:
            doc["metaphor"] = ref.metaphor
        for key in sorted(ref.extra):
            doc[key] = ref.extra[key]
        objects.append(doc)
    beats = []
    for beat in script.mainstory:
        doc = {
            "index": beat.index,
            "text": beat.text,
            "involved_objects": list(beat.involved_objects),
        }
        for key in sorted(beat.extra):
            doc[key] = beat.extra[key]
        beats.append(doc)
    fragments = []
    for frag in script.fragments:
        doc = {
            "name": frag.name,
            "topic": frag.topic,
            "core_object": frag.core_object,
            "agents": list(frag.agents),
            "interaction_mode": frag.interaction_mode,
            "symbolic_meaning": frag.symbolic_meaning,
            "content": frag.content,
            "triggerCondition": _trigger_to_json(frag.trigger),
        }
        for key in sorted(frag.extra):
            doc[key] = frag.extra[key]
        fragments.append(doc)
    document: dict[str, Any] = {
        "object": objects,
        "mainstory": beats,
        "fragments": fragments,
    }
    for key in sorted(script.extra):
        document[key] = script.extra[key]
    return document


def serialize_script(script: NarrativeScript) -> str:
    """Deterministic inverse of :func:`parse_script`:
    ``parse_script(serialize_script(s)) == s`` for every parseable script."""
    return json.dumps(script_to_json(script), indent=2, ensure_ascii=False) + "\n"
