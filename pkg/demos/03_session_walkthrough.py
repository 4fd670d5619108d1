#!/usr/bin/env python3
"""Session walkthrough: play a desk-scale exploration against the office
story tree and export the traversal log the evaluation harness consumes."""

import json
from pathlib import Path

from narravo.anchors import match_names
from narravo.engine import SessionEvent, available_triggers, export_log, handle_event, start_session
from narravo.scene import load_scene
from narravo.script import link_story_tree, parse_script

ROOT = Path(__file__).resolve().parent.parent

scene = load_scene((ROOT / "data" / "office_scene.json").read_text())
script = parse_script((ROOT / "data" / "scripts" / "office_s2.json").read_text())
tree = link_story_tree(script)
anchors = match_names([ref.name for ref in script.objects], scene)

state = start_session(tree, anchors)
print(f"Session started at beat {state.current_beat}; "
      f"{len(available_triggers(state))} fragments waiting.\n")

walk = [
    SessionEvent(2.0, "scan", object="table_console_01"),
    SessionEvent(5.0, "scan", object="door_01"),
    SessionEvent(6.0, "view_start", fragment="frag_door_threshold"),
    SessionEvent(14.0, "view_end", fragment="frag_door_threshold"),
    SessionEvent(20.0, "proximity", object="rack_server_01", distance=1.2),
    SessionEvent(25.0, "scan", object="coffee_mug"),  # not part of the story
    SessionEvent(30.0, "scan", object="cabinet_02"),
    SessionEvent(41.0, "scan", object="desk_05"),
    SessionEvent(44.0, "scan", object="whiteboard_09"),
    SessionEvent(52.0, "scan", object="curtain_03"),
]
for event in walk:
    state, newly = handle_event(state, event)
    what = event.object or event.fragment or ""
    fired = f" -> activated {', '.join(newly)}" if newly else ""
    print(f"t={event.t:5.1f}  {event.kind:10s} {what:18s} "
          f"beat={state.current_beat}{fired}")

print(f"\nMainstory complete: {state.current_beat == len(tree.beats) - 1}")
print("Still waiting:")
for name, unmet in available_triggers(state):
    print(f"  {name}: {unmet}")

log = export_log(state)
print("\nTraversal log:")
print(json.dumps(log.to_json(), indent=2))
