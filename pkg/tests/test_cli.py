# tests/test_cli.py

import pandas as pd
import pytest
import yaml

from conftest import REPO_ROOT
from info_mapf import EXIT_OK, EXIT_RUN_FAILURE, EXIT_USAGE, main
from utils.record_utils import read_records


def _scenario(tmp_path, name="tiny", **changes):
    data = {
        "schema_version": 1,
        "name": name,
        "map": str(REPO_ROOT / "maps" / "empty-8-8.map"),
        "num_agents": 2,
        "num_phenomena": 2,
        "mission_duration": 4,
        "mcts": {"iterations": 20},
    }
    data.update(changes)
    path = tmp_path / f"{name}.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_writes_one_record(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(_scenario(tmp_path)), "--seed", "3", "--out", str(out)]) == EXIT_OK
    df = read_records(out / "records.csv")
    assert len(df) == 1
    assert df.loc[0, "status"] == "ok"
    assert df.loc[0, "seed"] == 3
    assert (out / "records.jsonl").exists()


def test_repeated_runs_match_except_wall_time(tmp_path):
    scenario = str(_scenario(tmp_path))
    for folder in ("a", "b"):
        assert main(["run", "--scenario", scenario, "--seed", "11", "--out", str(tmp_path / folder)]) == EXIT_OK
    a = pd.read_csv(tmp_path / "a" / "records.csv").drop(columns="wall_time")
    b = pd.read_csv(tmp_path / "b" / "records.csv").drop(columns="wall_time")
    pd.testing.assert_frame_equal(a, b)


def test_missing_map_fails_the_run(tmp_path, capsys):
    missing = tmp_path / "nowhere.map"
    scenario = _scenario(tmp_path, map=str(missing))
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(scenario), "--out", str(out)]) == EXIT_RUN_FAILURE
    assert str(missing) in capsys.readouterr().err
    assert not (out / "records.csv").exists()


def test_invalid_scenario_is_a_usage_error(tmp_path, capsys):
    scenario = _scenario(tmp_path, planning_horizon=0)
    assert main(["run", "--scenario", str(scenario), "--out", str(tmp_path)]) == EXIT_USAGE
    assert "planning_horizon" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["run", "--out", "x"],
    ["validate", "--suite", "nonsense"],
    ["validate", "--quadrature-order", "0"],
    ["validate", "--trials", "0"],
])
def test_bad_arguments_exit_with_usage(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == EXIT_USAGE


def test_validate_passes(capsys):
    assert main(["validate", "--suite", "quadrature", "--trials", "5"]) == EXIT_OK
    assert "[PASS] quadrature" in capsys.readouterr().out


def test_validate_reports_counterexample_seed(capsys):
    assert main(["validate", "--suite", "convergence", "--quadrature-order", "1", "--seed", "40"]) == EXIT_RUN_FAILURE
    out = capsys.readouterr().out
    assert "[FAIL] convergence" in out
    assert "counterexample seed 40" in out


def test_bench_writes_records_and_summary(tmp_path):
    _scenario(tmp_path, name="tiny", mission_duration=3)
    sweep = tmp_path / "sweep.yaml"
    sweep.write_text(yaml.safe_dump({
        "schema_version": 1,
        "scenarios": ["tiny.yaml"],
        "algorithms": ["MA-V", "SA-V-CA"],
        "seeds": [0, 1],
    }))
    out = tmp_path / "bench"
    assert main(["bench", "--sweep", str(sweep), "--out", str(out), "--workers", "2"]) == EXIT_OK
    assert len(read_records(out / "records.csv")) == 4
    summary = pd.read_csv(out / "summary.csv")
    assert sorted(summary["algorithm"]) == ["MA-V", "SA-V-CA"]
    assert summary["runs"].tolist() == [2, 2]


def test_bench_keeps_records_when_a_run_fails(tmp_path):
    _scenario(tmp_path, name="tiny", mission_duration=2)
    _scenario(tmp_path, name="broken", map=str(tmp_path / "nowhere.map"))
    sweep = tmp_path / "sweep.yaml"
    sweep.write_text(yaml.safe_dump({
        "schema_version": 1,
        "scenarios": ["tiny.yaml", "broken.yaml"],
        "algorithms": ["MA-V"],
        "seeds": [0],
    }))
    out = tmp_path / "bench"
    assert main(["bench", "--sweep", str(sweep), "--out", str(out)]) == EXIT_RUN_FAILURE

    df = read_records(out / "records.csv")
    assert df["run_id"].tolist() == ["broken__MA-V__seed000000", "tiny__MA-V__seed000000"]
    assert df["status"].tolist() == ["failed", "ok"]
    assert "nowhere.map" in df.loc[0, "error"]


@pytest.mark.slow
def test_desk_reproduction(tmp_path):
    out = tmp_path / "desk"
    sweep = REPO_ROOT / "sweeps" / "desk_reproduction.yaml"
    assert main(["bench", "--sweep", str(sweep), "--out", str(out), "--workers", "4"]) == EXIT_OK

    df = read_records(out / "records.csv")
    assert len(df) == 80
    assert (df["status"] == "ok").all()
    means = df.groupby("algorithm")["unique_phenomena_discovered"].mean()
    assert means["MA-V"] >= means["SA-V"]
    assert means["MA-V"] >= means["SA-V-CA"]
    steps = df.groupby("algorithm")["mean_steps_to_first_unique"].mean()
    assert steps["MA-V"] <= steps["SA-V-CA"]
    collisions = df.groupby("algorithm")["collision_events"].sum()
    assert collisions["MA-V"] == 0 and collisions["SA-V-CA"] == 0
