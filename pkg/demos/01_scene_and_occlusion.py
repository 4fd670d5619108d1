#!/usr/bin/env python3
"""Scene model walkthrough: load a described environment, diff two moments
of it, and build the three-step occlusion protocol around one object."""

from pathlib import Path

from narravo.scene import (
    OcclusionTier,
    Pose,
    SceneObject,
    diff_states,
    load_scene,
    make_occlusion_tier,
    occlusion_fraction,
)

ROOT = Path(__file__).resolve().parent.parent

scene = load_scene((ROOT / "data" / "office_scene.json").read_text())
print(f"Loaded scene {scene.scene_id!r} with {len(scene.objects)} objects:")
for obj in scene.objects:
    meta = obj.semantics.metaphorical
    badge = f"  [{meta.text} @ {meta.weight}]" if meta else ""
    print(f"  - {obj.id:18s} {obj.name:18s} state={obj.state.label}{badge}")

# A later snapshot: the chair rolled away and the plant got worse.
moved_chair = scene.get("chair_office_06")
later_objects = []
for obj in scene.objects:
    if obj.id == "chair_office_06":
        obj = SceneObject(
            obj.id, obj.name,
            Pose((obj.pose.position[0] + 0.8, obj.pose.position[1],
                  obj.pose.position[2] - 0.6)),
            obj.bbox, obj.state, obj.semantics,
        )
    later_objects.append(obj)
later = type(scene)(scene.scene_id, tuple(later_objects), scene.viewpoint, 60.0)

print("\nWhat changed in the last minute:")
for change in diff_states(scene, later):
    print(f"  {change.object_id}: {change.kind}, displacement="
          f"{change.displacement and round(change.displacement, 3)} m")

# Occlusion protocol around the cabinet, seen from the viewpoint.
cabinet = scene.get("cabinet_02")
print("\nOcclusion tiers for the cabinet:")
for tier in OcclusionTier:
    boxes = make_occlusion_tier(cabinet, scene.viewpoint, tier)
    measured = occlusion_fraction(cabinet, scene.viewpoint, boxes)
    print(f"  {tier.name}: {len(boxes)} synthetic boxes -> "
          f"measured fraction {measured:.3f} (goal {tier.fraction:.2f})")
