from __future__ import annotations

import json
from pathlib import Path

import pytest

from narravo.anchors import match_names
from narravo.scene import load_scene
from narravo.script import link_story_tree, parse_script

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def office_scene():
    return load_scene((DATA_DIR / "office_scene.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def golden_script_doc() -> dict:
    return json.loads((DATA_DIR / "scripts" / "office_s2.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def golden_script(golden_script_doc):
    return parse_script(golden_script_doc)


@pytest.fixture(scope="session")
def golden_tree(golden_script):
    return link_story_tree(golden_script)


@pytest.fixture(scope="session")
def golden_anchors(golden_script, office_scene):
    return match_names([ref.name for ref in golden_script.objects], office_scene)
