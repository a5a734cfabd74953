"""
End-to-end test for the shipped experiment suite.

Runs ``configs/suite.json`` twice through the command-line entry point,
requires every check of every member to pass, and compares the two output
trees byte for byte.
"""

import json
from pathlib import Path

import pytest

from src.runner import main

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _tree(root: Path) -> dict[str, bytes]:
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


@pytest.mark.e2e
@pytest.mark.slow
def test_shipped_suite_passes_and_is_reproducible(tmp_path):
    """
    Run the shipped suite twice.

    Both runs must exit 0, each member must leave a passing manifest with the
    seed of its own config, and every artifact apart from the timestamped
    manifests must be identical across the two runs.
    """
    suite = CONFIGS / "suite.json"
    members = json.loads(suite.read_text())["suite"]["members"]

    codes = [
        main(["suite", "--config", str(suite), "--out", str(tmp_path / run), "--quiet"])
        for run in ("first", "second")
    ]

    assert codes == [0, 0]

    summary = json.loads((tmp_path / "first" / "suite_summary.json").read_text())
    assert [m["subcommand"] for m in summary["members"]] == [
        m["subcommand"] for m in members
    ]
    assert all(m["exit_code"] == 0 for m in summary["members"])
    for index, member in enumerate(members):
        member_dir = tmp_path / "first" / f"{index:02d}_{member['subcommand']}"
        manifest = json.loads((member_dir / "manifest.json").read_text())
        failed = [c["name"] for c in manifest["checks"] if not c["passed"]]
        expected_seed = json.loads((CONFIGS / member["config"]).read_text())["seed"]

        assert manifest["subcommand"] == member["subcommand"]
        assert manifest["seed"] == expected_seed
        assert manifest["checks"]
        assert failed == []
        assert manifest["passed"] is True

    assert _tree(tmp_path / "first") == _tree(tmp_path / "second")
