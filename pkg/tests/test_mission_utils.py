# tests/test_mission_utils.py

import pytest

from conftest import empty_grid
from utils.belief_utils import Observation, prior_belief
from utils.grid_utils import AgentPose
from utils.mission_utils import (
    AgentRuntime,
    Bubble,
    HistoryIntegrityError,
    PlanningError,
    form_bubbles,
    init_mission,
    merge_histories,
    mission_step,
    run_mission,
)


def _poses(grid, *row_cols):
    return [AgentPose(i, grid.to_cell(r, c)) for i, (r, c) in enumerate(row_cols)]


def _runtime(agent_id, cell, prior, observations):
    agent = AgentRuntime(agent_id=agent_id, pose=AgentPose(agent_id, cell), belief=prior)
    for obs in observations:
        agent.observe(obs)
    return agent


# --- Bubbles ---
def test_far_apart_agents_plan_solo():
    grid = empty_grid(20, 20)
    partition = form_bubbles(_poses(grid, (0, 0), (0, 10), (10, 0)), 5, grid)
    assert partition.bubbles == ()
    assert partition.solo == (0, 1, 2)


def test_chain_merges_transitively():
    grid = empty_grid(20, 20)
    partition = form_bubbles(_poses(grid, (0, 0), (0, 5), (0, 10)), 5, grid)
    assert partition.bubbles == ((0, 1, 2),)
    assert partition.solo == ()


def test_two_pairs_give_two_bubbles():
    grid = empty_grid(20, 20)
    partition = form_bubbles(_poses(grid, (0, 0), (19, 19), (1, 1), (18, 19)), 5, grid)
    assert partition.bubbles == ((0, 2), (1, 3))
    assert partition.bubble_of(3) == (1, 3)
    assert partition.solo == ()


def test_bubble_lead_is_lowest_id():
    assert Bubble(members=(4, 2, 7)).lead == 2


def test_every_agent_in_exactly_one_group():
    grid = empty_grid(20, 20)
    poses = _poses(grid, (0, 0), (0, 3), (10, 10), (19, 0), (12, 12), (5, 19))
    partition = form_bubbles(poses, 4, grid)
    members = [a for b in partition.bubbles for a in b] + list(partition.solo)
    assert sorted(members) == list(range(len(poses)))


# --- History merging ---
def test_identical_histories_merge_to_same_belief(seeded_belief):
    obs = list(seeded_belief.history)
    a = AgentRuntime(0, AgentPose(0, 0), seeded_belief, {o.identity: o for o in obs})
    b = AgentRuntime(1, AgentPose(1, 1), seeded_belief, {o.identity: o for o in obs})
    assert merge_histories([a, b]) is seeded_belief


def test_disjoint_histories_union(grid8, gp, ph):
    prior = prior_belief(grid8, gp, ph)
    a = _runtime(0, 0, prior, [Observation(cell=c, value=1.0, time=t, agent_id=0) for t, c in enumerate((0, 1, 2))])
    b = _runtime(1, 9, prior, [Observation(cell=c, value=1.2, time=t, agent_id=1) for t, c in enumerate((9, 10, 11, 12))])
    merged = merge_histories([a, b])
    assert len(merged.history) == 7
    assert a.known_identities() == b.known_identities()
    assert a.belief is merged and b.belief is merged
    assert [(o.time, o.agent_id) for o in merged.history] == sorted((o.time, o.agent_id) for o in merged.history)


def test_conflicting_observation_raises(grid8, gp, ph):
    prior = prior_belief(grid8, gp, ph)
    a = _runtime(0, 0, prior, [Observation(cell=0, value=1.0, time=0, agent_id=0)])
    b = _runtime(1, 1, prior, [])
    b.known_observations[(0, 0)] = Observation(cell=0, value=1.5, time=0, agent_id=0)
    with pytest.raises(HistoryIntegrityError):
        merge_histories([a, b])


# --- Mission loop ---
def test_zero_duration_mission(small_scenario):
    metrics = run_mission(small_scenario.with_overrides(mission_duration=0))
    assert metrics.unique_phenomena_discovered == 0
    assert all(len(t) == 1 for t in metrics.trajectories)
    assert metrics.nodes_generated == 0


def test_fixed_seed_is_deterministic(small_scenario):
    a = run_mission(small_scenario.with_overrides(seed=17))
    b = run_mission(small_scenario.with_overrides(seed=17))
    assert a.as_dict(include_wall_time=False) == b.as_dict(include_wall_time=False)


def test_field_remembers_the_mission_seed(small_scenario):
    config = small_scenario.with_overrides(seed=23)
    world, _ = init_mission(config)
    assert world.field.rng_seed == 23


def test_agent_beliefs_hold_exactly_their_known_observations(small_scenario):
    config = small_scenario.with_overrides(starts=((0, 0), (0, 2)), comm_range=3)
    world, agents = init_mission(config)
    sizes = [len(a.known_observations) for a in agents]
    for _ in range(4):
        mission_step(world, agents, config.comm_range, config.planning_horizon)
        for agent, before in zip(agents, sizes):
            assert set(o.identity for o in agent.belief.history) == agent.known_identities()
            assert len(agent.known_observations) >= before
        sizes = [len(a.known_observations) for a in agents]


def test_no_sharing_after_separation(small_scenario):
    config = small_scenario.with_overrides(
        map_path=small_scenario.map_path.parent / "empty-16-16.map",
        starts=((0, 0), (0, 1)), comm_range=2, mission_duration=6,
    )
    world, agents = init_mission(config)
    mission_step(world, agents, config.comm_range, config.planning_horizon)
    assert agents[0].known_identities() >= {(1, 0)}
    separated_at = world.time

    # Move agent 1 far away and keep it there.
    far = world.grid.to_cell(15, 15)
    world.positions[1] = far
    agents[1].pose = AgentPose(1, far, separated_at)
    for _ in range(4):
        mission_step(world, agents, config.comm_range, config.planning_horizon)
        assert all(
            not (agent_id == 1 and t > separated_at) for agent_id, t in agents[0].known_identities()
        )
        assert all(
            not (agent_id == 0 and t > separated_at) for agent_id, t in agents[1].known_identities()
        )


def test_single_agent_algorithms_coincide(small_scenario):
    config = small_scenario.with_overrides(num_agents=1, mission_duration=8, seed=5)
    runs = [run_mission(config.with_overrides(algorithm=algo)) for algo in ("MA-V", "SA-V", "SA-V-CA")]
    assert runs[0].trajectories == runs[1].trajectories == runs[2].trajectories


def test_bubble_search_uses_a_fraction_of_the_tree(small_scenario):
    config = small_scenario.with_overrides(starts=((3, 3), (3, 5)), comm_range=5, mission_duration=3)
    metrics = run_mission(config)
    assert metrics.bubble_steps > 0
    for entry in metrics.search_log:
        assert entry["expanded"] <= entry["generated"] < entry["max_possible"]


def test_budget_errors_name_the_bubble(small_scenario):
    config = small_scenario.with_overrides(starts=((0, 0), (0, 1)), max_planned_observations=3)
    world, agents = init_mission(config)
    with pytest.raises(PlanningError) as err:
        mission_step(world, agents, config.comm_range, config.planning_horizon)
    assert err.value.agent_ids == (0, 1)


def test_colocated_starts_need_sav(small_scenario):
    with pytest.raises(ValueError):
        init_mission(small_scenario.with_overrides(starts=((2, 2), (2, 2))))
