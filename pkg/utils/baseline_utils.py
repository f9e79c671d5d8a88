# utils/baseline_utils.py

from utils.mission_utils import run_mission


def run_baseline_sav(config, grid=None):
    """Independent forward search per agent, no sharing and no collision checks."""
    return run_mission(config.with_overrides(algorithm="SA-V"), grid=grid)


def run_baseline_savca(config, grid=None):
    """SA-V plus the reactive-yield collision check at execution."""
    return run_mission(config.with_overrides(algorithm="SA-V-CA"), grid=grid)


def run_baseline_mcts(config, grid=None):
    """Bubbles plan with root-level UCT over joint actions; solo agents use forward search."""
    return run_mission(config.with_overrides(algorithm="MA-MCTS-V"), grid=grid)


RUNNERS = {
    "MA-V": run_mission,
    "SA-V": run_baseline_sav,
    "SA-V-CA": run_baseline_savca,
    "MA-MCTS-V": run_baseline_mcts,
}


def run_scenario(config, grid=None):
    return RUNNERS[config.algorithm](config, grid=grid)
