# utils/mission_utils.py

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from utils.belief_utils import Observation, condition, prior_belief
from utils.grid_utils import AgentPose, load_map
from utils.info_utils import GainEvaluator
from utils.mcts_utils import mcts_search
from utils.search_utils import multi_agent_search, single_agent_forward_search
from utils.sim_utils import (
    MissionMetrics,
    World,
    build_field,
    record_discovery,
    sample_measurement,
    spawn_streams,
)

logger = logging.getLogger(__name__)

ALGORITHMS = ("MA-V", "SA-V", "SA-V-CA", "MA-MCTS-V")
SHARING_ALGORITHMS = ("MA-V", "MA-MCTS-V")


class HistoryIntegrityError(ValueError):
    pass


class PlanningError(RuntimeError):
    def __init__(self, agent_ids, step, cause):
        super().__init__(f"planning failed for agents {list(agent_ids)} at step {step}: {cause}")
        self.agent_ids = tuple(agent_ids)
        self.step = step


@dataclass(frozen=True)
class Bubble:
    members: tuple
    merged_history: tuple = ()

    @property
    def lead(self):
        return min(self.members)


@dataclass(frozen=True)
class BubblePartition:
    bubbles: tuple
    solo: tuple

    def bubble_of(self, agent_id):
        return next((b for b in self.bubbles if agent_id in b), None)


@dataclass
class AgentRuntime:
    """One agent's private state. belief.history always holds exactly known_observations."""
    agent_id: int
    pose: AgentPose
    belief: object
    known_observations: dict = field(default_factory=dict)

    def observe(self, obs):
        self.known_observations[obs.identity] = obs
        self.belief = condition(self.belief, [obs])

    def known_identities(self):
        return set(self.known_observations)


# --- Bubbles ---
def form_bubbles(poses, r, grid):
    """
    Connected components of the proximity graph where agents within Manhattan
    distance r are adjacent. Components of two or more agents are bubbles.
    """
    poses = list(poses)
    if not poses:
        return BubblePartition(bubbles=(), solo=())
    ids = [p.agent_id for p in poses]
    coords = grid.coordinates([p.cell for p in poses])
    adjacency = cdist(coords, coords, metric="cityblock") <= r
    _, labels = connected_components(csr_matrix(adjacency), directed=False)

    groups = {}
    for agent_id, label in zip(ids, labels):
        groups.setdefault(int(label), []).append(agent_id)
    components = sorted(tuple(sorted(g)) for g in groups.values())
    bubbles = tuple(c for c in components if len(c) >= 2)
    solo = tuple(sorted(c[0] for c in components if len(c) == 1))
    return BubblePartition(bubbles=bubbles, solo=solo)


def merge_histories(members):
    """
    Union of the members' observations by identity (agent_id, time), conditioned from the
    prior in (time, agent_id) order. Every member ends up holding the merged belief.
    """
    if not members:
        raise ValueError("merge_histories needs at least one member")

    union = {}
    for member in members:
        for identity, obs in member.known_observations.items():
            seen = union.get(identity)
            if seen is not None and (seen.value != obs.value or seen.cell != obs.cell):
                raise HistoryIntegrityError(
                    f"observation {identity} differs between agents: {seen} vs {obs}"
                )
            union[identity] = obs

    merged = next(
        (m.belief for m in members if m.known_observations.keys() == union.keys()), None
    )
    if merged is None:
        base = members[0].belief
        ordered = sorted(union.values(), key=lambda o: (o.time, o.agent_id))
        merged = condition(prior_belief(base.grid, base.gp, base.phenomenon), ordered)

    for member in members:
        member.known_observations = dict(union)
        member.belief = merged
    return merged


# --- Mission loop ---
def _discovery_threshold(config):
    return config.discovery.threshold if config.discovery.rule == "belief" else None


def _observe(world, agent, cell, step):
    value = sample_measurement(world.field, cell, agent.belief.gp.sigma, world.streams["noise"])
    agent.observe(Observation(cell=cell, value=value, time=step, agent_id=agent.agent_id))
    record_discovery(
        world.field, agent.agent_id, cell, step, world.metrics,
        belief=agent.belief, threshold=_discovery_threshold(world.config),
    )


def _sample_starts(grid, field, num_agents, rng):
    passable = np.asarray(grid.passable_cells, dtype=int)
    free = np.setdiff1d(passable, field.phenomena)
    pool = free if free.size >= num_agents else passable
    if pool.size < num_agents:
        raise ValueError(f"{grid.name} has {pool.size} passable cells for {num_agents} agents")
    return [int(c) for c in rng.choice(pool, size=num_agents, replace=False)]


def init_mission(config, grid=None):
    """World and per-agent runtimes at t=0, each agent holding its start-cell observation."""
    grid = grid or load_map(config.map_path)
    streams = spawn_streams(config.seed)
    world_field = build_field(
        grid, config.num_phenomena, config.gp, config.phenomenon,
        seed=config.seed, rng=streams["field"], mode=config.field.mode, amplitude=config.field.amplitude,
    )

    if config.starts:
        starts = [grid.to_cell(row, col) for row, col in config.starts]
        for (row, col), cell in zip(config.starts, starts):
            if not grid.in_bounds(row, col) or not grid.is_passable(cell):
                raise ValueError(f"start ({row}, {col}) is not a passable cell of {grid.name}")
        if len(set(starts)) != len(starts) and config.algorithm != "SA-V":
            raise ValueError(f"{config.algorithm} needs distinct start cells, got {list(config.starts)}")
    else:
        starts = _sample_starts(grid, world_field, config.num_agents, streams["starts"])

    metrics = MissionMetrics(num_agents=config.num_agents)
    world = World(grid=grid, field=world_field, config=config, streams=streams,
                  positions=list(starts), metrics=metrics)
    prior = prior_belief(grid, config.gp, config.phenomenon)
    agents = [AgentRuntime(agent_id=i, pose=AgentPose(i, cell, 0), belief=prior) for i, cell in enumerate(starts)]
    for agent in agents:
        metrics.trajectories[agent.agent_id].append(agent.pose.cell)
        _observe(world, agent, agent.pose.cell, 0)
    return world, agents


def _plan_bubble(world, members, merged, delta):
    config = world.config
    positions = [m.pose.cell for m in members]
    evaluator = GainEvaluator(merged, order=config.quadrature_order, max_planned=config.max_planned_observations)
    if config.algorithm == "MA-MCTS-V":
        return mcts_search(
            merged, positions, world.grid, delta, world.streams["mcts"],
            iterations=config.mcts.iterations, exploration=config.mcts.exploration,
            exhaustive=config.mcts.exhaustive, selection=config.mcts.selection,
            evaluator=evaluator,
        )
    return multi_agent_search(
        merged, positions, world.grid, delta,
        pruning=config.search.pruning,
        condition_h_on_plan=config.search.condition_h_on_plan,
        evaluator=evaluator,
    )


def mission_step(world, agents, r, delta):
    """
    One receding-horizon step: form bubbles, plan per bubble / solo agent, execute every
    agent's first action simultaneously, then each agent observes its new cell.
    """
    config = world.config
    step = world.time + 1
    sharing = config.algorithm in SHARING_ALGORITHMS

    if sharing:
        partition = form_bubbles([a.pose for a in agents], r, world.grid)
    else:
        partition = BubblePartition(bubbles=(), solo=tuple(a.agent_id for a in agents))
    if partition.bubbles:
        world.metrics.bubble_steps += 1
        logger.debug(f"Step {step}: bubbles {list(partition.bubbles)}, solo {list(partition.solo)}")

    first_actions = [None] * len(agents)
    for members_ids in partition.bubbles:
        members = [agents[i] for i in members_ids]
        try:
            merged = merge_histories(members)
            bubble = Bubble(members=members_ids, merged_history=merged.history)
            plan = _plan_bubble(world, members, merged, delta)
        except Exception as e:
            raise PlanningError(members_ids, step, e) from e
        world.metrics.record_search(step, members_ids, plan.stats)
        logger.debug(
            f"Step {step}: bubble {members_ids} (lead {bubble.lead}, {len(bubble.merged_history)} observations) "
            f"generated={plan.stats.nodes_generated} "
            f"expanded={plan.stats.nodes_expanded} max={plan.stats.max_possible_nodes}"
        )
        for agent_id, action in zip(members_ids, plan.first_actions):
            first_actions[agent_id] = action

    for agent_id in partition.solo:
        agent = agents[agent_id]
        try:
            plan = single_agent_forward_search(
                agent.belief, agent.pose.cell, world.grid, delta,
                order=config.quadrature_order, max_planned=config.max_planned_observations,
            )
        except Exception as e:
            raise PlanningError((agent_id,), step, e) from e
        first_actions[agent_id] = plan.first_actions[0]

    executed = world.execute(first_actions, avoid_collisions=config.algorithm != "SA-V")
    for agent, cell in zip(agents, world.positions):
        agent.pose = AgentPose(agent.agent_id, cell, step)
        _observe(world, agent, cell, step)
    world.time = step
    return executed


def run_mission(config, grid=None):
    logger.info(
        f"Starting {config.algorithm} on {config.name} (seed={config.seed}, "
        f"|A|={config.num_agents}, N={config.num_phenomena}, H={config.mission_duration})"
    )
    started = time.perf_counter()
    world, agents = init_mission(config, grid=grid)
    for _ in range(config.mission_duration):
        mission_step(world, agents, config.comm_range, config.planning_horizon)
    world.metrics.wall_time = time.perf_counter() - started
    logger.info(
        f"Finished {config.algorithm} on {config.name} (seed={config.seed}): "
        f"{world.metrics.unique_phenomena_discovered} unique phenomena in {world.metrics.wall_time:.2f}s"
    )
    return world.metrics
