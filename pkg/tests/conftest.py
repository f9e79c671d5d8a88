# tests/conftest.py

import sys
import os

# Add the parent directory to the system path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from pathlib import Path

import pytest

from utils.belief_utils import GPHyperparams, Observation, PhenomenonParams, condition, prior_belief
from utils.config_utils import load_scenario
from utils.grid_utils import GridMap, parse_map

REPO_ROOT = Path(__file__).resolve().parents[1]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size acceptance runs (deselect with -m 'not slow')")


def empty_grid(height, width):
    return GridMap(width=width, height=height, blocked=(False,) * (height * width), name=f"empty-{height}-{width}")


@pytest.fixture
def gp():
    return GPHyperparams()


@pytest.fixture
def ph():
    return PhenomenonParams()


@pytest.fixture
def grid8():
    return empty_grid(8, 8)


@pytest.fixture
def walled_grid():
    text = "\n".join([
        "type octile",
        "height 4",
        "width 5",
        "map",
        ".....",
        ".@@@.",
        ".@G@.",
        "..@..",
    ])
    return parse_map(text, name="walled")


@pytest.fixture
def seeded_belief(grid8, gp, ph):
    history = [
        Observation(cell=9, value=1.9, time=0, agent_id=0),
        Observation(cell=10, value=0.7, time=1, agent_id=0),
        Observation(cell=40, value=1.45, time=0, agent_id=1),
    ]
    return condition(prior_belief(grid8, gp, ph), history)


@pytest.fixture
def scenario_16():
    return load_scenario(REPO_ROOT / "scenarios" / "empty-16-16.yaml")


@pytest.fixture
def small_scenario(scenario_16):
    return scenario_16.with_overrides(
        map_path=REPO_ROOT / "maps" / "empty-8-8.map", name="empty-8-8",
        num_agents=2, num_phenomena=3, mission_duration=6,
    )
