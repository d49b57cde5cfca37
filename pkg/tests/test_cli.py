from __future__ import annotations

import json
from pathlib import Path

from typer.testing import CliRunner

from bdsim.cli.run import app
from bdsim.core.manifest import load_manifest
from bdsim.utils.tables import read_csv

runner = CliRunner()
SPEED_ARGS = ["speed", "--n", "2", "--mu", "0", "--horizon", "100", "--reps", "30", "--seed", "7", "--quiet"]


def _invoke(*args: str):
    return runner.invoke(app, list(args))


def test_speed_writes_tables_summary_and_manifest(tmp_path: Path) -> None:
    result = _invoke(*SPEED_ARGS, "--threads", "1", "--output-dir", str(tmp_path))

    assert result.exit_code == 0, result.output
    for name in ("speed.csv", "summary.txt", "manifest.json", "provenance.jsonl"):
        assert (tmp_path / name).is_file(), name
    manifest = load_manifest(tmp_path / "manifest.json")
    assert manifest.command == "speed"
    assert manifest.config["n"] == 2
    assert manifest.seeds.master_seed == 7
    assert set(manifest.outputs) == {"speed.csv"}
    assert "speed X_1(t)/t" in (tmp_path / "summary.txt").read_text(encoding="utf-8")
    stages = [json.loads(line)["stage"] for line in (tmp_path / "provenance.jsonl").read_text().splitlines()]
    assert stages[0] == "bootstrap"
    assert "write" in stages


def test_same_seed_gives_identical_csv_across_thread_counts(tmp_path: Path) -> None:
    first = tmp_path / "one"
    second = tmp_path / "two"
    assert _invoke(*SPEED_ARGS, "--threads", "1", "--output-dir", str(first)).exit_code == 0
    assert _invoke(*SPEED_ARGS, "--threads", "3", "--output-dir", str(second)).exit_code == 0

    assert (first / "speed.csv").read_bytes() == (second / "speed.csv").read_bytes()


def test_config_file_with_flag_override(tmp_path: Path) -> None:
    config = tmp_path / "speed.json"
    config.write_text(json.dumps({"command": "speed", "n": 4, "horizon": 100, "reps": 30, "seed": 3}), encoding="utf-8")
    out = tmp_path / "out"

    result = _invoke("speed", "--config", str(config), "--n", "2", "--threads", "1", "--output-dir", str(out), "--quiet")

    assert result.exit_code == 0, result.output
    table = read_csv(out / "speed.csv")
    assert table.column("n") == ["2"]
    assert load_manifest(out / "manifest.json").config["seed"] == 3


def test_config_errors_exit_2_with_one_line(tmp_path: Path) -> None:
    result = _invoke("speed", "--n", "2", "--horizon", "50", "--reps", "30", "--output-dir", str(tmp_path), "--quiet")

    assert result.exit_code == 2
    assert "error=config exit=2" in result.output


def test_unknown_config_key_exits_2(tmp_path: Path) -> None:
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"command": "speed", "temperature": 1.0}), encoding="utf-8")

    result = _invoke("speed", "--config", str(config), "--output-dir", str(tmp_path / "out"), "--quiet")

    assert result.exit_code == 2
    assert "temperature" in result.output


def test_precondition_exits_3(tmp_path: Path) -> None:
    result = _invoke(
        "couple-monotone", "--n", "2", "--n-prime", "4", "--init-a", "5,5", "--init-b", "0,0,0,0", "--reps", "1", "--threads", "1",
        "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 3
    assert "error=precondition exit=3" in result.output


def test_criticality_exits_3(tmp_path: Path) -> None:
    result = _invoke(
        "escape", "--n", "2", "--mu", "0.5", "--critical-speed", "0.5", "--critical-speed-se", "0.01", "--reps", "2",
        "--horizon", "10", "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 3
    assert "error=criticality exit=3" in result.output


def test_resource_cap_exits_4(tmp_path: Path) -> None:
    result = _invoke(
        "simulate", "--n", "1", "--rule", "lbbm", "--width", "100", "--cap", "5", "--horizon", "100", "--reps", "1",
        "--threads", "1", "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 4
    assert "error=resource_cap exit=4" in result.output


def test_couple_monotone_with_debug_dump(tmp_path: Path) -> None:
    result = _invoke(
        "couple-monotone", "--n", "2", "--n-prime", "4", "--events", "200", "--reps", "3", "--threads", "1", "--debug",
        "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 0, result.output
    table = read_csv(tmp_path / "coupling_monotone.csv")
    assert table.column("violations") == ["0", "0", "0"]
    assert table.column("first_violation_time") == ["", "", ""]
    debug = read_csv(tmp_path / "coupling_debug.csv")
    assert len(debug.rows) == 400


def test_bbm_radius_with_newick(tmp_path: Path) -> None:
    result = _invoke(
        "bbm-radius", "--t-law", "fixed:1", "--x-grid", "0.5,1,2", "--reps", "50", "--t", "1", "--debug", "--threads", "1",
        "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 0, result.output
    assert (tmp_path / "radius_tail.csv").is_file()
    assert (tmp_path / "forest.nwk").read_text(encoding="utf-8").strip().endswith(";")
    assert "forest.nwk" in load_manifest(tmp_path / "manifest.json").outputs


def test_sweep_over_population_sizes(tmp_path: Path) -> None:
    result = _invoke(
        "sweep", "--target", "speed", "--n-grid", "1,2", "--horizon", "100", "--reps", "30", "--threads", "1",
        "--output-dir", str(tmp_path), "--quiet",
    )

    assert result.exit_code == 0, result.output
    table = read_csv(tmp_path / "sweep_speed.csv")
    assert table.columns[:2] == ["point", "n"]
    assert table.column("point") == ["0", "1"]
    seeds = load_manifest(tmp_path / "manifest.json").seeds
    assert len(seeds.point_seeds) == 2
    assert seeds.sweep_rule is not None


def test_sweep_needs_one_axis(tmp_path: Path) -> None:
    result = _invoke("sweep", "--target", "speed", "--output-dir", str(tmp_path), "--quiet")

    assert result.exit_code == 2
    assert "error=config" in result.output


def test_no_arguments_shows_help() -> None:
    result = _invoke()

    assert "couple-killright" in result.output
