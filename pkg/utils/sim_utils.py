# utils/sim_utils.py

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import cholesky

from utils.grid_utils import Action, step_cell

logger = logging.getLogger(__name__)

STREAM_NAMES = ("field", "noise", "starts", "mcts")

BUMP_MIN_LENGTH = 1.5


# --- Seeded RNG streams ---
def spawn_streams(seed):
    """One master seed -> independent named generators (field, noise, starts, mcts)."""
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}


def _as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


# --- Ground truth ---
@dataclass(frozen=True)
class GroundTruthField:
    values: np.ndarray
    phenomena: tuple
    rng_seed: int = 0

    def value_at(self, cell):
        return float(self.values[cell])

    def is_phenomenon(self, cell):
        return cell in self.phenomena


def _bump(grid, center, amplitude, length):
    coords = grid.coordinates(np.arange(grid.size))
    d2 = np.sum((coords - grid.coordinates([center])[0]) ** 2, axis=1)
    return amplitude * np.exp(-d2 / length ** 2)


def build_field(grid, num_phenomena, gp, ph, seed=0, mode="bumps", amplitude=1.0, rng=None):
    """
    Flat field at the GP mean with `num_phenomena` radial bumps at uniformly sampled
    passable cells (mode="bumps"), or a GP prior draw with phenomena planted at
    super-threshold cells (mode="gp_prior").

    `seed` is recorded on the field; draws come from `rng` when one is given.
    """
    passable = np.asarray(grid.passable_cells, dtype=int)
    if num_phenomena < 0 or num_phenomena > passable.size:
        raise ValueError(
            f"cannot place {num_phenomena} phenomena on {passable.size} passable cells of {grid.name}"
        )
    rng = _as_rng(seed if rng is None else rng)
    length = max(gp.theta2, BUMP_MIN_LENGTH)
    values = np.full(grid.size, float(gp.mean))

    if mode == "bumps":
        phenomena = rng.choice(passable, size=num_phenomena, replace=False) if num_phenomena else []
        for cell in phenomena:
            values += _bump(grid, int(cell), amplitude, length)

    elif mode == "gp_prior":
        coords = grid.coordinates(passable)
        k = gp.kernel(coords, coords) + 1e-8 * np.eye(passable.size)
        values[passable] = gp.mean + cholesky(k, lower=True) @ rng.standard_normal(passable.size)
        above = passable[values[passable] > ph.u_tilde]
        take = min(num_phenomena, above.size)
        phenomena = list(rng.choice(above, size=take, replace=False)) if take else []
        rest = np.setdiff1d(passable, phenomena)
        for cell in rng.choice(rest, size=num_phenomena - take, replace=False):
            lift = ph.u_tilde + amplitude - values[cell]
            values += _bump(grid, int(cell), max(lift, amplitude), length)
            phenomena.append(cell)

    else:
        raise ValueError(f"unknown field mode {mode!r}")

    phenomena = tuple(sorted(int(c) for c in phenomena))
    logger.debug(f"Built {mode} field on {grid.name} with phenomena at {phenomena}")
    return GroundTruthField(values=values, phenomena=phenomena, rng_seed=int(seed))


def sample_measurement(field, cell, sigma, rng):
    return field.value_at(cell) + sigma * float(rng.standard_normal())


# --- Metrics ---
@dataclass
class MissionMetrics:
    num_agents: int
    unique_phenomena_discovered: int = 0
    steps_to_first_unique: list = field(default_factory=list)
    nodes_generated: int = 0
    nodes_expanded: int = 0
    max_possible_nodes: int = 0
    reactive_yields: int = 0
    collision_events: int = 0
    bubble_steps: int = 0
    wall_time: float = 0.0
    discovered: dict = field(default_factory=dict)
    search_log: list = field(default_factory=list)
    trajectories: list = field(default_factory=list)

    def __post_init__(self):
        if not self.steps_to_first_unique:
            self.steps_to_first_unique = [None] * self.num_agents
        if not self.trajectories:
            self.trajectories = [[] for _ in range(self.num_agents)]

    def record_search(self, step, members, stats):
        self.nodes_generated += stats.nodes_generated
        self.nodes_expanded += stats.nodes_expanded
        self.max_possible_nodes += stats.max_possible_nodes
        self.search_log.append({
            "step": step,
            "members": list(members),
            "generated": stats.nodes_generated,
            "expanded": stats.nodes_expanded,
            "max_possible": stats.max_possible_nodes,
        })

    @property
    def search_ratio(self):
        return self.nodes_generated / self.max_possible_nodes if self.max_possible_nodes else 0.0

    @property
    def mean_steps_to_first_unique(self):
        found = [s for s in self.steps_to_first_unique if s is not None]
        return float(np.mean(found)) if found else None

    def as_dict(self, include_wall_time=True):
        data = asdict(self)
        data["discovered"] = {str(k): list(v) for k, v in sorted(self.discovered.items())}
        if not include_wall_time:
            data.pop("wall_time")
        return data


def record_discovery(field, agent_id, cell, step, metrics, belief=None, threshold=None):
    """
    Count a unique discovery when the agent occupies a not-yet-discovered phenomenon cell.
    With `threshold`, the agent's posterior p(X=1) at the cell must also reach it.
    """
    if not field.is_phenomenon(cell) or cell in metrics.discovered:
        return metrics
    if threshold is not None and belief is not None and belief.prob_at(cell) < threshold:
        return metrics
    metrics.discovered[cell] = (agent_id, step)
    metrics.unique_phenomena_discovered += 1
    if metrics.steps_to_first_unique[agent_id] is None:
        metrics.steps_to_first_unique[agent_id] = step
    logger.info(f"Agent {agent_id} discovered phenomenon at cell {cell} (step {step})")
    return metrics


# --- Execution ---
def resolve_conflicts(current, targets):
    """
    Reactive yield: among agents targeting one cell the lowest id moves and the others
    stay put; an agent already staying in a cell keeps it; of a swapping pair the higher
    id stays. Repeats until no conflict is left. Returns (final targets, yield count).
    """
    final = list(targets)
    yields = 0
    changed = True
    while changed:
        changed = False
        for i in range(len(final)):
            for j in range(i + 1, len(final)):
                if final[i] == current[j] and final[j] == current[i] and final[i] != current[i]:
                    final[j] = current[j]
                    yields += 1
                    changed = True
        by_cell = {}
        for agent, cell in enumerate(final):
            by_cell.setdefault(cell, []).append(agent)
        for cell, agents in sorted(by_cell.items()):
            if len(agents) < 2:
                continue
            stayers = [a for a in agents if final[a] == current[a]]
            keeper = stayers[0] if stayers else min(agents)
            for a in agents:
                if a != keeper:
                    final[a] = current[a]
                    yields += 1
                    changed = True
    return final, yields


def count_collisions(previous, current):
    vertex = sum(
        1 for i in range(len(current)) for j in range(i + 1, len(current)) if current[i] == current[j]
    )
    swaps = sum(
        1
        for i in range(len(current))
        for j in range(i + 1, len(current))
        if current[i] == previous[j] and current[j] == previous[i] and current[i] != current[j]
    )
    return vertex + swaps


@dataclass
class World:
    """Simulator handle: ground truth, true agent positions, RNG streams and metrics."""
    grid: object
    field: GroundTruthField
    config: object
    streams: dict
    positions: list
    metrics: MissionMetrics
    time: int = 0

    def execute(self, actions, avoid_collisions=True):
        previous = list(self.positions)
        targets = [step_cell(self.grid, c, a) for c, a in zip(previous, actions)]
        if None in targets:
            raise ValueError(f"infeasible action in {actions} from {previous}")

        executed = list(actions)
        if avoid_collisions:
            final, yields = resolve_conflicts(previous, targets)
            for agent, (planned, actual) in enumerate(zip(targets, final)):
                if planned != actual:
                    executed[agent] = Action.IDLE
            if yields:
                logger.info(f"Step {self.time + 1}: {yields} reactive yield(s)")
            self.metrics.reactive_yields += yields
            targets = final

        collisions = count_collisions(previous, targets)
        if collisions:
            logger.info(f"Step {self.time + 1}: {collisions} collision event(s)")
        self.metrics.collision_events += collisions
        self.positions = targets
        for agent, cell in enumerate(targets):
            self.metrics.trajectories[agent].append(cell)
        return tuple(executed)
