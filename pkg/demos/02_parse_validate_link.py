#!/usr/bin/env python3
"""Interchange format walkthrough: parse a generated script, watch the
validator catch typical generator mistakes, and link the story tree."""

import copy
import json
from pathlib import Path

from narravo.script import link_story_tree, parse_script, serialize_script, validate_script

ROOT = Path(__file__).resolve().parent.parent

doc = json.loads((ROOT / "data" / "scripts" / "office_s2.json").read_text())
script = parse_script(doc)
print(f"Parsed: {len(script.objects)} objects "
      f"({sum(1 for o in script.objects if o.role == 'key')} key), "
      f"{len(script.mainstory)} beats, {len(script.fragments)} fragments")

report = validate_script(script)
print(f"Validation of the clean script: ok={report.ok}")

# Typical generator failures, one field each.
mutations = {
    "core object never declared (the CAVE problem)":
        lambda d: d["fragments"][0].__setitem__("core_object", "CAVE"),
    "two fragments share a name":
        lambda d: d["fragments"][1].__setitem__("name", d["fragments"][0]["name"]),
    "after-edge cycle":
        lambda d: d["fragments"][8]["triggerCondition"].__setitem__(
            "fragment", d["fragments"][8]["name"]),
    "mainstory deleted":
        lambda d: d.__setitem__("mainstory", []),
}
print("\nSingle-field corruptions and what the validator says:")
for label, mutate in mutations.items():
    broken = copy.deepcopy(doc)
    mutate(broken)
    bad_report = validate_script(parse_script(broken))
    codes = ", ".join(sorted(bad_report.codes()))
    print(f"  {label}: {codes}")

tree = link_story_tree(script)
print(f"\nStory tree: {len(tree.root_fragments)} fragments hang off the spine, "
      f"{len(tree.after_edges)} after-edges, orphans={list(tree.orphans) or 'none'}")
for parent, child in tree.after_edges:
    print(f"  {parent} -> {child}")

round_tripped = parse_script(serialize_script(script))
print(f"\nserialize -> parse round trip preserves the script: "
      f"{round_tripped == script}")
