import json
from pathlib import Path

import pytest

from src.runner import main

pytestmark = pytest.mark.integration

LIGHT_COVERS = {
    "experiment": "covers-light",
    "seed": 11,
    "covers": {
        "layer_sizes": [2, 6, 1],
        "n_samples": 30,
        "steps": 20,
        "snapshot_every": 10,
    },
}


CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def write_config(directory: Path, name: str, payload: dict) -> Path:
    path = directory / name
    path.write_text(json.dumps(payload))
    return path


def run_cli(subcommand: str, config: Path, out: Path, *extra: str) -> int:
    args = [subcommand, "--config", str(config), "--out", str(out), "--quiet"]
    return main([*args, *extra])


def artifact_bytes(out_dir: Path) -> dict[str, bytes]:
    return {
        p.relative_to(out_dir).as_posix(): p.read_bytes()
        for p in sorted(out_dir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


class TestSingleRun:
    """End-to-end runs of one subcommand through the command-line entry point."""

    def test_run_writes_manifest_and_artifacts(self, tmp_path, capsys):
        config = write_config(tmp_path, "covers.json", LIGHT_COVERS)
        out = tmp_path / "out"

        code = run_cli("covers", config, out)

        manifest = json.loads((out / "manifest.json").read_text())
        assert code == 0
        assert manifest["passed"] is True
        assert manifest["seed"] == 11
        assert manifest["outputs"] == [
            "resolved_config.json",
            "covers.csv",
            "cover_drift.json",
        ]
        assert "PASS  snapshot_count" in capsys.readouterr().out

    def test_same_seed_gives_identical_artifacts(self, tmp_path):
        config = write_config(tmp_path, "covers.json", LIGHT_COVERS)
        run_cli("covers", config, tmp_path / "a")
        run_cli("covers", config, tmp_path / "b")

        a, b = artifact_bytes(tmp_path / "a"), artifact_bytes(tmp_path / "b")
        assert a.keys() == {"resolved_config.json", "covers.csv", "cover_drift.json"}
        assert a == b

    def test_seed_flag_is_recorded(self, tmp_path):
        config = write_config(tmp_path, "covers.json", LIGHT_COVERS)
        out = tmp_path / "out"
        run_cli("covers", config, out, "--seed", "5")

        resolved = json.loads((out / "resolved_config.json").read_text())
        assert resolved["seed"] == 5

    def test_unknown_key_exits_with_two(self, tmp_path, capsys):
        config = write_config(tmp_path, "bad.json", {"covers": {"stepz": 3}})
        out = tmp_path / "out"

        code = main(["covers", "--config", str(config), "--out", str(out)])

        assert code == 2
        assert "covers.stepz" in capsys.readouterr().err
        assert not out.exists()

    def test_runtime_failure_still_writes_a_manifest(self, tmp_path):
        # two samples cannot fit three components
        block = {
            "n_samples": 2,
            "components": 3,
            "train_steps": 10,
            "checkpoint_every": 5,
        }
        config = write_config(tmp_path, "plasticity.json", {"plasticity": block})
        out = tmp_path / "out"

        code = run_cli("plasticity", config, out)

        manifest = json.loads((out / "manifest.json").read_text())
        assert code == 1
        assert manifest["passed"] is False
        assert manifest["error"]


class TestSuite:
    def test_empty_suite_passes(self, tmp_path):
        config = write_config(tmp_path, "suite.json", {"experiment": "empty"})
        out = tmp_path / "out"

        code = run_cli("suite", config, out)

        summary = json.loads((out / "suite_summary.json").read_text())
        assert code == 0
        assert summary == {"members": [], "passed": True}

    def test_bad_member_fails_softly(self, tmp_path):
        write_config(tmp_path, "covers.json", LIGHT_COVERS)
        write_config(tmp_path, "broken.json", {"datagen": {"unknown": 1}})
        config = write_config(
            tmp_path,
            "suite.json",
            {
                "suite": {
                    "members": [
                        {"subcommand": "datagen", "config": "broken.json"},
                        {"subcommand": "covers", "config": "covers.json"},
                    ]
                }
            },
        )
        out = tmp_path / "out"

        code = run_cli("suite", config, out)

        summary = json.loads((out / "suite_summary.json").read_text())
        broken, covers = summary["members"]
        assert code == 1
        assert summary["passed"] is False
        assert broken["exit_code"] == 2
        assert "datagen.unknown" in broken["error"]
        assert covers["exit_code"] == 0
        assert (out / "01_covers" / "manifest.json").is_file()
        assert not (out / "00_datagen").exists()


@pytest.mark.slow
class TestShippedConfigs:
    """The ready-made configs must pass every check they record."""

    @pytest.mark.parametrize("subcommand", ["boundary", "federation"])
    def test_every_check_passes(self, tmp_path, subcommand):
        out = tmp_path / subcommand

        code = run_cli(subcommand, CONFIGS / f"{subcommand}.json", out)

        manifest = json.loads((out / "manifest.json").read_text())
        assert [c["name"] for c in manifest["checks"] if not c["passed"]] == []
        assert code == 0

    def test_boundary_pull_moves_the_held_out_point(self, tmp_path):
        out = tmp_path / "boundary"
        run_cli("boundary", CONFIGS / "boundary.json", out)

        weak = json.loads((out / "boundary.json").read_text())["weak_boundary"]
        assert weak["end"] > weak["start"]

    def test_federation_runs_anchor_free_and_anchored(self, tmp_path):
        out = tmp_path / "federation"
        run_cli("federation", CONFIGS / "federation.json", out)

        manifest = json.loads((out / "manifest.json").read_text())
        names = {c["name"] for c in manifest["checks"]}
        scores = json.loads((out / "federation_summary.json").read_text())[
            "equilibrium_scores"
        ]
        assert {"equilibrium_decreases", "anchors_bit_identical"} <= names
        assert len(scores) == 50
        assert scores[-1] < scores[0]
