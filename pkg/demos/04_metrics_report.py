#!/usr/bin/env python3
"""Metric harness walkthrough: the closed-form metrics one by one, then the
batch evaluator over the recorded inputs in data/metrics."""

import tempfile
from pathlib import Path

from narravo.metrics import (
    LatencyTrace,
    OcclusionTrial,
    RatingSample,
    coordinate_error,
    dynamic_tolerance,
    latency,
    lighting_robustness,
    narrative_break_index,
    occlusion_rate,
    paired_ttest,
)
from narravo.pipeline import evaluate_batch
from narravo.scene import OcclusionTier

ROOT = Path(__file__).resolve().parent.parent

print("Closed-form metrics on small hand-checkable inputs:")
pairs = [((0, 0, 0), (1, 0, 0)), ((0, 0, 0), (0, 2, 0))]
print(f"  coordinate error of {pairs}: {coordinate_error(pairs)} m")

trials = [OcclusionTrial(OcclusionTier.T30, True)] * 5 + [
    OcclusionTrial(OcclusionTier.T90, False)
]
print(f"  occlusion rate, 5 of 6 correct: {occlusion_rate(trials)} %")

trace = LatencyTrace(((0.0, 4.2), (10.0, 14.8)))
print(f"  latency over deltas 4.2 and 4.8: {latency(trace)} s")

scores = [RatingSample("p1", "NBI", 2, 10), RatingSample("p2", "NBI", 3, 10)]
print(f"  narrative break index of scores 2 and 3: {narrative_break_index(scores)}")

print(f"  lighting robustness 0.921 vs 1.0: {lighting_robustness(0.921, 1.0)} %")

frags = [(("office",), ("door",)), (("weather",), ("small talk",))]
print(f"  thematic drift, 1 of 2 off-theme: {dynamic_tolerance(frags, ('office',))} %")

p = paired_ttest([2.0, 4.0, 6.0, 8.0], [1.0, 2.0, 3.0, 4.0])
print(f"  paired t-test on diffs 1,2,3,4: p = {p:.4f}")

print("\nBatch evaluation over data/metrics:")
with tempfile.TemporaryDirectory() as out:
    result = evaluate_batch(ROOT / "data" / "metrics", out)
    print(result.cross_report.render_text())
    written = sorted(Path(out).iterdir())
    print("Report files written:", ", ".join(p.name for p in written))
