from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from narravo.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"


def test_generate_replay_bundle(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "generate",
            "--scene", str(DATA / "office_scene.json"),
            "--strategy", "s2",
            "--backend", "replay",
            "--fixtures", str(DATA / "fixtures"),
            "--out", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "fragments: 13" in result.output
    assert (tmp_path / "s2" / "script.json").exists()


def test_generate_with_bad_scene_fails(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["generate", "--scene", str(DATA / "office_scene.json"),
         "--backend", "replay", "--fixtures", str(tmp_path / "nothing"),
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 1
    assert "generate" in result.output  # stage tag


def test_validate_clean_script():
    runner = CliRunner()
    result = runner.invoke(
        main, ["validate", "--script", str(DATA / "scripts" / "office_s2.json")]
    )
    assert result.exit_code == 0, result.output
    assert "OK" in result.output


def test_validate_broken_script(tmp_path):
    doc = json.loads((DATA / "scripts" / "office_s2.json").read_text())
    doc["fragments"][0]["core_object"] = "CAVE"
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc))
    runner = CliRunner()
    result = runner.invoke(main, ["validate", "--script", str(broken)])
    assert result.exit_code == 1
    assert "UNRESOLVED_CORE_OBJECT" in result.output


def test_eval_command(tmp_path):
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["eval", "--inputs", str(DATA / "metrics"), "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert "83.3" in result.output
    assert (tmp_path / "cross_scenario.report.json").exists()
