# tests/test_sim_utils.py

import numpy as np
import pytest

from conftest import empty_grid
from utils.belief_utils import GPHyperparams, PhenomenonParams
from utils.grid_utils import Action
from utils.sim_utils import (
    GroundTruthField,
    MissionMetrics,
    World,
    build_field,
    count_collisions,
    record_discovery,
    resolve_conflicts,
    sample_measurement,
    spawn_streams,
)


def test_no_phenomena_gives_flat_field(grid8, gp, ph):
    field = build_field(grid8, 0, gp, ph, seed=1)
    assert field.phenomena == ()
    assert np.all(field.values == gp.mean)


def test_single_bump_peaks_at_phenomenon(grid8, gp, ph):
    field = build_field(grid8, 1, gp, ph, seed=4)
    assert len(field.phenomena) == 1
    assert np.flatnonzero(field.values >= gp.mean + 1.0).tolist() == list(field.phenomena)


def test_phenomena_exceed_threshold(grid8, gp, ph):
    field = build_field(grid8, 6, gp, ph, seed=7)
    assert len(set(field.phenomena)) == 6
    assert all(field.value_at(c) > ph.u_tilde for c in field.phenomena)


def test_gp_prior_field_plants_above_threshold(grid8, ph):
    gp = GPHyperparams(theta1=0.4, theta2=2.0)
    field = build_field(grid8, 5, gp, ph, seed=3, mode="gp_prior")
    assert len(field.phenomena) == 5
    assert all(field.value_at(c) > ph.u_tilde for c in field.phenomena)


def test_same_seed_same_field(grid8, gp, ph):
    a = build_field(grid8, 4, gp, ph, seed=12)
    b = build_field(grid8, 4, gp, ph, seed=12)
    assert a.phenomena == b.phenomena
    assert np.array_equal(a.values, b.values)


def test_field_records_seed_when_drawing_from_a_stream(grid8, gp, ph):
    a = build_field(grid8, 4, gp, ph, seed=31, rng=spawn_streams(31)["field"])
    b = build_field(grid8, 4, gp, ph, seed=31, rng=spawn_streams(31)["field"])
    assert a.rng_seed == 31
    assert a.phenomena == b.phenomena


def test_too_many_phenomena(gp, ph):
    with pytest.raises(ValueError):
        build_field(empty_grid(2, 2), 5, gp, ph, seed=0)


def test_noise_free_measurement_is_exact(grid8, gp, ph):
    field = build_field(grid8, 2, gp, ph, seed=0)
    rng = np.random.default_rng(0)
    assert sample_measurement(field, 10, 0.0, rng) == field.value_at(10)


def test_noise_std_matches_sigma():
    field = GroundTruthField(values=np.ones(4), phenomena=())
    rng = np.random.default_rng(2024)
    draws = np.array([sample_measurement(field, 1, 0.2, rng) for _ in range(100_000)])
    assert abs(draws.std() - 0.2) < 0.02 * 0.2
    assert abs(draws.mean() - 1.0) < 0.01


def test_streams_are_deterministic_and_independent():
    a, b = spawn_streams(5), spawn_streams(5)
    assert a["noise"].random() == b["noise"].random()
    c = spawn_streams(5)
    assert c["noise"].random() != c["field"].random()


def test_discovery_counts_unique_and_first_only():
    field = GroundTruthField(values=np.ones(9), phenomena=(2, 6))
    metrics = MissionMetrics(num_agents=2)
    record_discovery(field, 0, 2, 3, metrics)
    record_discovery(field, 1, 2, 4, metrics)
    assert metrics.unique_phenomena_discovered == 1
    assert metrics.steps_to_first_unique == [3, None]
    record_discovery(field, 0, 6, 8, metrics)
    assert metrics.unique_phenomena_discovered == 2
    assert metrics.steps_to_first_unique == [3, None]


def test_phenomenon_free_run_metrics_are_empty():
    field = GroundTruthField(values=np.ones(9), phenomena=())
    metrics = MissionMetrics(num_agents=3)
    for step, cell in enumerate((0, 1, 2)):
        record_discovery(field, step, cell, step, metrics)
    assert metrics.unique_phenomena_discovered == 0
    assert metrics.mean_steps_to_first_unique is None


def test_belief_rule_requires_confidence(seeded_belief):
    field = GroundTruthField(values=np.ones(64), phenomena=(9, 10))
    metrics = MissionMetrics(num_agents=1)
    # Cell 9 was measured at 1.9, cell 10 at 0.7.
    record_discovery(field, 0, 10, 1, metrics, belief=seeded_belief, threshold=0.9)
    assert metrics.unique_phenomena_discovered == 0
    record_discovery(field, 0, 9, 2, metrics, belief=seeded_belief, threshold=0.9)
    assert metrics.unique_phenomena_discovered == 1


def test_vertex_conflict_lower_id_moves():
    final, yields = resolve_conflicts([0, 2], [1, 1])
    assert final == [1, 2] and yields == 1


def test_staying_agent_keeps_its_cell():
    final, yields = resolve_conflicts([0, 1], [1, 1])
    assert final == [0, 1] and yields == 1


def test_swap_conflict_higher_id_yields_then_cascades():
    # 0 <-> 1 swap; 1 yields and stays, so 0 runs into it and yields too.
    final, yields = resolve_conflicts([0, 1], [1, 0])
    assert final == [0, 1] and yields == 2


def test_chain_following_is_allowed():
    final, yields = resolve_conflicts([0, 1, 2], [1, 2, 3])
    assert final == [1, 2, 3] and yields == 0


def test_execute_without_avoidance_counts_collisions(grid8, gp, ph):
    field = build_field(grid8, 0, gp, ph, seed=0)
    world = World(grid=grid8, field=field, config=None, streams=spawn_streams(0),
                  positions=[0, 2], metrics=MissionMetrics(num_agents=2))
    executed = world.execute([Action.RIGHT, Action.LEFT], avoid_collisions=False)
    assert world.positions == [1, 1]
    assert executed == (Action.RIGHT, Action.LEFT)
    assert world.metrics.collision_events == 1 and world.metrics.reactive_yields == 0


def test_execute_with_avoidance_substitutes_idle(grid8, gp, ph):
    field = build_field(grid8, 0, gp, ph, seed=0)
    world = World(grid=grid8, field=field, config=None, streams=spawn_streams(0),
                  positions=[0, 2], metrics=MissionMetrics(num_agents=2))
    executed = world.execute([Action.RIGHT, Action.LEFT])
    assert world.positions == [1, 2]
    assert executed == (Action.RIGHT, Action.IDLE)
    assert world.metrics.collision_events == 0 and world.metrics.reactive_yields == 1


def test_collision_count_includes_swaps():
    assert count_collisions([0, 1], [1, 0]) == 1
    assert count_collisions([0, 5, 9], [3, 3, 3]) == 3
