from __future__ import annotations

import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narravo import script as sc
from narravo.script import (
    Fragment,
    MainStoryBeat,
    NarrativeScript,
    ObjectRef,
    ScriptParseError,
    ScriptValidationError,
    TriggerCondition,
    link_story_tree,
    parse_script,
    serialize_script,
    validate_script,
)

MINIMAL = {
    "object": [{"name": "door", "role": "key"}],
    "mainstory": [{"index": 0, "text": "It begins at the door.", "involved_objects": ["door"]}],
    "fragments": [],
}


def make_script(fragments=(), objects=("door", "cabinet"), beats=1) -> NarrativeScript:
    return NarrativeScript(
        objects=tuple(ObjectRef(name) for name in objects),
        mainstory=tuple(
            MainStoryBeat(i, f"beat {i}", (objects[0],)) for i in range(beats)
        ),
        fragments=tuple(fragments),
    )


def frag(name, core="door", trigger=None, content="something happens"):
    return Fragment(
        name=name,
        core_object=core,
        content=content,
        trigger=trigger or TriggerCondition.scan(core),
    )


# --- parsing


def test_parse_minimal_script():
    script = parse_script(json.dumps(MINIMAL))
    assert len(script.objects) == 1
    assert script.mainstory[0].index == 0
    assert script.fragments == ()


def test_parse_golden_script_shape(golden_script):
    keys = [o for o in golden_script.objects if o.role == "key"]
    branching = [o for o in golden_script.objects if o.role == "branching"]
    assert (len(keys), len(branching)) == (3, 10)
    assert len(golden_script.fragments) == 13
    assert len(golden_script.mainstory) == 3


def test_missing_trigger_condition_reports_field_path(golden_script_doc):
    doc = copy.deepcopy(golden_script_doc)
    del doc["fragments"][0]["triggerCondition"]
    with pytest.raises(ScriptParseError, match=r"\$\.fragments\[0\]"):
        parse_script(doc)


def test_syntax_error_reports_position():
    with pytest.raises(ScriptParseError, match="line 1"):
        parse_script('{"object": [,]}')


def test_unknown_trigger_kind_rejected():
    doc = copy.deepcopy(MINIMAL)
    doc["fragments"] = [
        {
            "name": "f",
            "core_object": "door",
            "content": "x",
            "triggerCondition": {"kind": "telepathy", "object": "door"},
        }
    ]
    with pytest.raises(ScriptParseError, match="telepathy"):
        parse_script(doc)


def test_invalid_role_rejected():
    doc = copy.deepcopy(MINIMAL)
    doc["object"][0]["role"] = "protagonist"
    with pytest.raises(ScriptParseError, match="role"):
        parse_script(doc)


def test_trigger_nesting_depth_limited():
    nested = {"kind": "scan", "object": "door"}
    for _ in range(3):
        nested = {"kind": "all_of", "all_of": [nested]}
    doc = copy.deepcopy(MINIMAL)
    doc["fragments"] = [
        {"name": "f", "core_object": "door", "content": "x", "triggerCondition": nested}
    ]
    with pytest.raises(ScriptParseError, match="depth"):
        parse_script(doc)


def test_two_level_composition_allowed():
    trigger = {
        "kind": "any_of",
        "any_of": [
            {"kind": "all_of", "all_of": [
                {"kind": "scan", "object": "door"},
                {"kind": "proximity", "object": "door", "radius": 1.0},
            ]},
            {"kind": "scan", "object": "door"},
        ],
    }
    doc = copy.deepcopy(MINIMAL)
    doc["fragments"] = [
        {"name": "f", "core_object": "door", "content": "x", "triggerCondition": trigger}
    ]
    script = parse_script(doc)
    assert script.fragments[0].trigger.depth() == 2


def test_unknown_fields_are_preserved():
    doc = copy.deepcopy(MINIMAL)
    doc["generator"] = "gpt-4o"
    doc["object"][0]["confidence"] = 0.93
    script = parse_script(doc)
    assert script.extra == {"generator": "gpt-4o"}
    assert script.objects[0].extra == {"confidence": 0.93}
    again = parse_script(serialize_script(script))
    assert again == script


# --- validation


def test_clean_golden_script_validates_empty(golden_script):
    assert validate_script(golden_script).ok


def test_unresolved_core_object_caught():
    # The known failure mode: a fragment anchored on an object the generator
    # never declared (misrecognised items like "CAVE").
    script = make_script([frag("f1", core="CAVE")])
    report = validate_script(script)
    assert sc.UNRESOLVED_CORE_OBJECT in report.codes()


def test_duplicate_fragment_names_caught():
    script = make_script([frag("fragment_1"), frag("fragment_1", core="cabinet")])
    assert sc.DUPLICATE_FRAGMENT_NAME in validate_script(script).codes()


def test_empty_mainstory_caught():
    script = NarrativeScript(
        objects=(ObjectRef("door"),), mainstory=(), fragments=()
    )
    assert sc.EMPTY_MAINSTORY in validate_script(script).codes()


def test_noncontiguous_beat_indices_caught():
    script = NarrativeScript(
        objects=(ObjectRef("door"),),
        mainstory=(MainStoryBeat(0, "a"), MainStoryBeat(2, "b")),
    )
    assert sc.NONCONTIGUOUS_BEAT_INDICES in validate_script(script).codes()


def test_cycle_in_after_edges_caught():
    a = frag("A", trigger=TriggerCondition.after("B"))
    b = frag("B", trigger=TriggerCondition.after("A"))
    report = validate_script(make_script([a, b]))
    assert sc.CYCLE_IN_AFTER_EDGES in report.codes()
    cycle_violation = next(v for v in report.violations if v.code == sc.CYCLE_IN_AFTER_EDGES)
    assert "A" in cycle_violation.message and "B" in cycle_violation.message


def test_orphan_downstream_of_cycle_flagged():
    a = frag("A", trigger=TriggerCondition.after("A"))
    c = frag("C", trigger=TriggerCondition.after("A"))
    report = validate_script(make_script([a, c]))
    orphans = [v for v in report.violations if v.code == sc.ORPHAN_FRAGMENT]
    assert len(orphans) == 1 and "C" in orphans[0].message


def test_unresolved_trigger_reference_caught():
    script = make_script([frag("f1", trigger=TriggerCondition.scan("ghost"))])
    assert sc.UNRESOLVED_TRIGGER_REF in validate_script(script).codes()
    script = make_script([frag("f1", trigger=TriggerCondition.after("missing"))])
    assert sc.UNRESOLVED_TRIGGER_REF in validate_script(script).codes()


def test_invalid_radius_caught():
    script = make_script([frag("f1", trigger=TriggerCondition.proximity("door", -1.0))])
    assert sc.INVALID_TRIGGER in validate_script(script).codes()


def test_empty_content_caught():
    script = make_script([frag("f1", content="")])
    assert sc.EMPTY_TEXT in validate_script(script).codes()


def test_duplicate_object_name_is_warning():
    script = NarrativeScript(
        objects=(ObjectRef("door"), ObjectRef("door")),
        mainstory=(MainStoryBeat(0, "x"),),
    )
    report = validate_script(script)
    assert sc.DUPLICATE_OBJECT_NAME in report.codes()
    assert not report.errors


def test_unresolved_involved_object_is_warning():
    script = NarrativeScript(
        objects=(ObjectRef("door"),),
        mainstory=(MainStoryBeat(0, "x", ("window",)),),
    )
    report = validate_script(script)
    assert sc.UNRESOLVED_INVOLVED_OBJECT in report.codes()
    assert not report.errors


def test_validate_is_total_on_weird_scripts():
    script = NarrativeScript(objects=(), mainstory=(), fragments=())
    report = validate_script(script)
    assert not report.ok


# --- linking


def test_link_spine_only():
    tree = link_story_tree(make_script([]))
    assert tree.root_fragments == ()
    assert tree.after_edges == ()
    assert tree.orphans == ()


def test_link_builds_after_edge():
    a = frag("A")
    b = frag("B", core="cabinet", trigger=TriggerCondition.after("A"))
    tree = link_story_tree(make_script([a, b]))
    assert tree.after_edges == (("A", "B"),)
    assert tree.root_fragments == ("A",)
    assert tree.orphans == ()


def test_link_refuses_cycles_listing_them():
    a = frag("A", trigger=TriggerCondition.after("B"))
    b = frag("B", trigger=TriggerCondition.after("A"))
    with pytest.raises(ScriptValidationError, match=sc.CYCLE_IN_AFTER_EDGES) as err:
        link_story_tree(make_script([a, b]))
    assert any(v.code == sc.CYCLE_IN_AFTER_EDGES for v in err.value.violations)


def test_link_succeeds_iff_validation_clean(golden_script):
    tree = link_story_tree(golden_script)
    assert set(tree.root_fragments) <= {f.name for f in golden_script.fragments}
    assert tree.orphans == ()


# --- serialization


def test_round_trip_minimal():
    script = parse_script(json.dumps(MINIMAL))
    assert parse_script(serialize_script(script)) == script


def test_round_trip_golden(golden_script):
    assert parse_script(serialize_script(golden_script)) == golden_script


def test_serialize_is_deterministic(golden_script):
    assert serialize_script(golden_script) == serialize_script(golden_script)


# --- property: parse/serialize round trip over generated scripts

_names = st.sampled_from(["door", "cabinet", "curtain", "desk", "lamp", "clock"])
_frag_names = st.sampled_from(["f1", "f2", "f3", "f4", "f5"])


def _leaf() -> st.SearchStrategy[TriggerCondition]:
    return st.one_of(
        st.builds(TriggerCondition.scan, _names),
        st.builds(
            TriggerCondition.proximity,
            _names,
            st.floats(0.1, 10.0, allow_nan=False),
        ),
        st.builds(TriggerCondition.after, _frag_names),
    )


def _trigger() -> st.SearchStrategy[TriggerCondition]:
    composite = st.builds(
        lambda kind, children: TriggerCondition(kind, children=tuple(children)),
        st.sampled_from(["all_of", "any_of"]),
        st.lists(_leaf(), min_size=1, max_size=3),
    )
    return st.one_of(_leaf(), composite)


_scripts = st.builds(
    lambda objects, texts, frags: NarrativeScript(
        objects=tuple(ObjectRef(n, role) for n, role in objects.items()),
        mainstory=tuple(MainStoryBeat(i, t) for i, t in enumerate(texts)),
        fragments=tuple(
            Fragment(name=n, core_object=core, content=c, trigger=t)
            for n, (core, c, t) in frags.items()
        ),
    ),
    st.dictionaries(_names, st.sampled_from(["key", "branching"]), min_size=1),
    st.lists(st.text(min_size=1, max_size=40), min_size=1, max_size=4),
    st.dictionaries(
        _frag_names,
        st.tuples(_names, st.text(min_size=1, max_size=40), _trigger()),
        max_size=5,
    ),
)


@given(_scripts)
@settings(max_examples=100, deadline=None)
def test_round_trip_property(script):
    assert parse_script(serialize_script(script)) == script
