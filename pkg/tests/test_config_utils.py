# tests/test_config_utils.py

import pytest
import yaml

from conftest import REPO_ROOT
from utils.config_utils import ConfigError, load_scenario, load_sweep, scenario_from_dict


def _base(**changes):
    data = {
        "schema_version": 1,
        "map": "../maps/empty-8-8.map",
        "num_agents": 2,
        "num_phenomena": 3,
        "mission_duration": 5,
    }
    data.update(changes)
    return data


def test_committed_scenario_carries_defaults():
    config = load_scenario(REPO_ROOT / "scenarios" / "empty-16-16.yaml")
    assert (config.num_agents, config.num_phenomena, config.mission_duration) == (3, 5, 50)
    assert (config.planning_horizon, config.comm_range) == (2, 5)
    assert (config.gp.theta1, config.gp.theta2, config.gp.sigma, config.gp.mean) == (0.4, 0.01, 0.2, 1.0)
    assert (config.phenomenon.u_tilde, config.phenomenon.p1, config.phenomenon.p2) == (1.4, 0.98, 0.002)
    assert config.map_path.exists()


def test_seed_override():
    config = load_scenario(REPO_ROOT / "scenarios" / "empty-16-16.yaml", seed=42)
    assert config.seed == 42
    assert config.run_id.endswith("seed000042")


def test_realistic_preset():
    config = load_scenario(REPO_ROOT / "scenarios" / "empty-32-32-realistic.yaml")
    assert (config.gp.theta1, config.gp.theta2) == (1.25, 4.0)
    assert config.field.mode == "gp_prior"


@pytest.mark.parametrize("changes, field", [
    (dict(planning_horizon=0), "planning_horizon"),
    (dict(comm_range=-1), "comm_range"),
    (dict(mission_duration=-3), "mission_duration"),
    (dict(algorithm="MA-X"), "algorithm"),
    (dict(schema_version=2), "schema_version"),
    (dict(num_agents="two"), "num_agents"),
    (dict(colour="red"), "colour"),
    (dict(gp={"theta2": 0.0}), "gp.theta2"),
    (dict(mcts={"selection": "median"}), "mcts.selection"),
    (dict(quadrature_order=80), "quadrature_order"),
    (dict(starts=[[0, 0]]), "starts"),
])
def test_invalid_fields_are_named(changes, field):
    with pytest.raises(ConfigError) as err:
        scenario_from_dict(_base(**changes), base_dir=REPO_ROOT / "scenarios")
    assert err.value.field == field


def test_missing_required_field():
    data = _base()
    del data["num_agents"]
    with pytest.raises(ConfigError) as err:
        scenario_from_dict(data)
    assert err.value.field == "num_agents"


def test_sweep_expands_cross_product(tmp_path):
    scenario = tmp_path / "s.yaml"
    scenario.write_text(yaml.safe_dump(_base(map=str(REPO_ROOT / "maps" / "empty-8-8.map"), name="s")))
    sweep = tmp_path / "sweep.yaml"
    sweep.write_text(yaml.safe_dump({
        "schema_version": 1,
        "scenarios": ["s.yaml"],
        "algorithms": ["MA-V", "SA-V"],
        "seeds": {"start": 3, "count": 4},
        "overrides": {"mission_duration": 9, "gp": {"sigma": 0.1}},
    }))
    configs = load_sweep(sweep)
    assert len(configs) == 8
    assert {c.seed for c in configs} == {3, 4, 5, 6}
    assert all(c.mission_duration == 9 and c.gp.sigma == 0.1 for c in configs)
    assert len({c.run_id for c in configs}) == 8


def test_desk_sweep_has_eighty_runs():
    configs = load_sweep(REPO_ROOT / "sweeps" / "desk_reproduction.yaml")
    assert len(configs) == 80
    assert {c.algorithm for c in configs} == {"MA-V", "SA-V", "SA-V-CA", "MA-MCTS-V"}


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "absent.yaml")
