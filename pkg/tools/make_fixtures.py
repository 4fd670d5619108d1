#!/usr/bin/env python3
"""Regenerate the replay fixtures under data/fixtures from the authored
scripts in data/scripts. Run after editing prompt templates or the office
scene; fixture keys are digests of (prompt, model), so stale fixtures are
replaced rather than silently reused."""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from narravo.gateway import DEFAULT_REPLAY_MODEL, GenerationRequest, PromptStrategy, record_fixture
from narravo.scene import load_scene

# Deterministic stand-in timings (seconds), one per strategy.
ELAPSED = {"s1": 4.5, "s2": 4.7, "s3": 4.6}

SCRIPTS = {
    PromptStrategy.S1_CONVENTIONAL: "office_s1.json",
    PromptStrategy.S2_METAPHORICAL: "office_s2.json",
    PromptStrategy.S3_DIRECT: "office_s3.json",
}


def main() -> None:
    scene = load_scene((ROOT / "data" / "office_scene.json").read_text(encoding="utf-8"))
    fixture_dir = ROOT / "data" / "fixtures"
    if fixture_dir.exists():
        shutil.rmtree(fixture_dir)
    for strategy, filename in SCRIPTS.items():
        response = (ROOT / "data" / "scripts" / filename).read_text(encoding="utf-8")
        request = GenerationRequest(scene, strategy, max_fragments=13)
        key = record_fixture(
            request,
            response,
            fixture_dir,
            model=DEFAULT_REPLAY_MODEL,
            elapsed_s=ELAPSED[strategy.value],
        )
        print(f"{strategy.value}: {key}")


if __name__ == "__main__":
    main()
