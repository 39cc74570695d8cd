import json
import subprocess
import sys

import numpy as np
import pytest

from mavplan import cli


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_mission_empty_world(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "world: {n_obstacles: 0}\nstart: [0, 0, 0]\ngoal: [5, 0, 0]\n")
    out = tmp_path / "out"
    assert cli.main(["mission", "--scenario", sc, "--out", str(out)]) == 0
    log = json.loads((out / "mission_log.json").read_text())
    assert log["outcome"] == "reached" and log["trace"] == ["Wait", "Gen", "Exec", "Wait"]
    assert log["metrics"]["min_clearance"] is None
    executed = np.loadtxt(out / "executed.txt")
    assert executed.shape[1] == 3
    assert (out / "planned_00.txt").exists()


def test_mission_goal_occupied(tmp_path, capsys):
    write(tmp_path, "c.txt", "5 0 0\n")
    sc = write(tmp_path, "s.yaml", "cloud: c.txt\nstart: [0, 0, 0]\ngoal: [5, 0, 0]\n")
    assert cli.main(["mission", "--scenario", sc, "--out", str(tmp_path / "o")]) == cli.EXIT_GOAL_OCCUPIED
    assert "goal occupied" in capsys.readouterr().err


def test_mission_missing_scenario(tmp_path, capsys):
    assert cli.main(["mission", "--scenario", str(tmp_path / "nope.yaml")]) == cli.EXIT_PARSE
    assert "ParseError" in capsys.readouterr().err


def test_validation_error_exit(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "planner: {d_safe: -1}\n")
    assert cli.main(["bench", "--scenario", sc, "--worlds", "1"]) == cli.EXIT_PARSE
    assert "d_safe" in capsys.readouterr().err


def test_mission_timeout(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "world: {n_obstacles: 0}\nstart: [0, 0, 0]\ngoal: [5, 0, 0]\n"
                                   "mission: {max_ticks: 3}\n")
    assert cli.main(["mission", "--scenario", sc, "--out", str(tmp_path / "o")]) == cli.EXIT_TIMEOUT
    assert json.loads((tmp_path / "o" / "mission_log.json").read_text())["outcome"] == "timeout"


def test_mission_byte_identical(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "seed: 3\nstart: [2, 10, 10]\ngoal: [10, 10, 10]\n"
                                   "world: {n_obstacles: 20}\n")
    for d in ("a", "b"):
        assert cli.main(["mission", "--scenario", sc, "--out", str(tmp_path / d)]) in (0, 3, 4)
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_bench_subcommand(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "bench: {map_scans: 1, breakdown_worlds: 1}\n")
    out = tmp_path / "b"
    rc = cli.main(["bench", "--scenario", sc, "--worlds", "2", "--seed", "4", "--planner", "a_star",
                   "--planner", "rrt_improved", "--out", str(out), "--quiet"])
    assert rc == 0
    lines = (out / "bench.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert {ln.split(",")[1] for ln in lines[1:]} == {"a_star", "rrt_improved"}


def test_bench_bad_planner(capsys):
    assert cli.main(["bench", "--planner", "dijkstra", "--worlds", "1"]) == cli.EXIT_USAGE
    assert cli.main(["bench", "--worlds", "0"]) == cli.EXIT_USAGE


def test_smooth(tmp_path, capsys):
    path = write(tmp_path, "p.txt", "0 0 0\n2 1 0\n4 0 0\n")
    assert cli.main(["smooth", path, "--out", str(tmp_path / "s")]) == 0
    rows = np.loadtxt(tmp_path / "s" / "ilqr_trajectory.txt")
    assert rows.shape[1] == 7 and rows[0, 0] == 0.0
    spline = np.loadtxt(tmp_path / "s" / "spline_trajectory.txt")
    np.testing.assert_allclose(spline[0, 1:4], [0, 0, 0], atol=1e-9)


def test_sample_space(tmp_path, capsys):
    sc = write(tmp_path, "s.yaml", "start: [0, 0, 0]\ngoal: [10, 0, 0]\n")
    assert cli.main(["sample-space", "--scenario", sc, "--n", "2", "--out", str(tmp_path / "o")]) == 0
    meta = json.loads((tmp_path / "o" / "sample_space.json").read_text())
    assert meta["semi_axes"] == [10.0, 4.0, 4.0]
    pts = np.loadtxt(tmp_path / "o" / "sample_space.txt")
    assert len(pts) == meta["count"]


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "mavplan.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for sub in ("bench", "mission", "smooth", "sample-space"):
        assert sub in out.stdout


def test_requires_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
