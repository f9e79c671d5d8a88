# utils/search_utils.py

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from utils.grid_utils import Action, feasible_actions, step_cell
from utils.info_utils import DEFAULT_MAX_PLANNED, DEFAULT_QUADRATURE_ORDER, GainEvaluator

logger = logging.getLogger(__name__)

# Plan values closer than this (nats) are ties.
TIE_EPS = 1e-12


@dataclass
class SearchStats:
    nodes_generated: int = 0
    nodes_expanded: int = 0
    max_possible_nodes: int = 0

    @property
    def ratio(self):
        return self.nodes_generated / self.max_possible_nodes if self.max_possible_nodes else 0.0


@dataclass(eq=False)
class SearchNode:
    depth: int
    joint_positions: tuple
    committed_plan: tuple
    actions: tuple
    g: float
    h: float = 0.0
    parent: Optional["SearchNode"] = None
    child_bounds: dict = field(default_factory=dict)

    @property
    def f(self):
        return self.g + self.h

    @property
    def first_joint_action(self):
        return self.actions[0] if self.actions else None


@dataclass
class JointPlan:
    actions: tuple
    value: float
    cells: tuple
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def first_actions(self):
        return tuple(seq[0] for seq in self.actions)


def max_possible_nodes(num_agents, delta):
    b = 5 ** num_agents
    return sum(b ** d for d in range(1, delta + 1))


# --- Child generation ---
def _collision_free(grid, positions, options):
    children = []
    for joint_action in itertools.product(*options):
        moved = tuple(step_cell(grid, c, a) for c, a in zip(positions, joint_action))
        if None in moved or len(set(moved)) != len(moved):
            continue
        swapped = any(
            moved[i] == positions[j] and moved[j] == positions[i]
            for i, j in itertools.combinations(range(len(positions)), 2)
        )
        if not swapped:
            children.append((joint_action, moved))
    return children


def joint_children(grid, positions):
    """
    Collision-free joint actions in canonical order as (joint_action, new_positions, forced).
    When no joint move is collision-free, agents may also Idle (forced=True).
    """
    options = [feasible_actions(grid, c) for c in positions]
    children = _collision_free(grid, positions, options)
    if children:
        return [(ja, moved, False) for ja, moved in children]
    widened = [o if Action.IDLE in o else o + (Action.IDLE,) for o in options]
    return [(ja, moved, True) for ja, moved in _collision_free(grid, positions, widened)]


def agent_sequences(grid, cell, steps):
    """Single-agent (actions, cells) sequences of length `steps`, canonical order."""
    if steps == 0:
        yield (), ()
        return
    for a in feasible_actions(grid, cell):
        nxt = step_cell(grid, cell, a)
        for rest_actions, rest_cells in agent_sequences(grid, nxt, steps - 1):
            yield (a,) + rest_actions, (nxt,) + rest_cells


def _action_key(actions):
    return tuple(tuple(int(a) for a in step) for step in actions)


def is_enclosed(grid, positions):
    return all(feasible_actions(grid, c) == (Action.IDLE,) for c in positions)


def idle_plan(positions, delta, value, stats):
    return JointPlan(
        actions=tuple((Action.IDLE,) * delta for _ in positions),
        value=value,
        cells=tuple((c,) * delta for c in positions),
        stats=stats,
    )


def _pick(candidates):
    # Lexicographically smallest joint action sequence among near-best candidates.
    top = max(value for value, _, _ in candidates)
    return min((c for c in candidates if c[0] >= top - TIE_EPS), key=lambda c: _action_key(c[1]))


# --- Heuristic ---
def h_value(belief, node, grid, delta, evaluator=None, condition_on_plan=False):
    """
    h = sum over agents of each agent's best independent continuation gain, conditioned
    on the real history only. Also returns the per-child bound for every joint child:
    the sum over agents of the best continuation starting with that agent's action.
    """
    remaining = delta - node.depth
    if remaining <= 0:
        return 0.0, {}
    gain = evaluator or GainEvaluator(belief)
    committed = [c for path in node.committed_plan for c in path]
    base = gain(committed) if condition_on_plan and committed else 0.0

    best_by_first = []
    for cell in node.joint_positions:
        table = {}
        for actions, cells in agent_sequences(grid, cell, remaining):
            value = gain(committed + list(cells)) - base if condition_on_plan else gain(cells)
            table[actions[0]] = max(table.get(actions[0], -math.inf), value)
        best_by_first.append(table)

    h = sum(max(table.values()) for table in best_by_first)
    bounds = {}
    for joint_action, _, _ in joint_children(grid, node.joint_positions):
        if all(a in table for a, table in zip(joint_action, best_by_first)):
            bounds[joint_action] = sum(table[a] for a, table in zip(joint_action, best_by_first))
        else:
            # Forced Idle outside the single-agent action model: never prune.
            bounds[joint_action] = math.inf
    return h, bounds


# --- Multi-agent A* ---
def multi_agent_search(
    belief,
    positions,
    grid,
    delta,
    order=DEFAULT_QUADRATURE_ORDER,
    max_planned=DEFAULT_MAX_PLANNED,
    pruning=True,
    condition_h_on_plan=False,
    evaluator=None,
):
    positions = tuple(int(p) for p in positions)
    if not positions:
        raise ValueError("multi_agent_search needs at least one agent")
    if len(set(positions)) != len(positions):
        raise ValueError(f"agent positions must be pairwise distinct, got {positions}")
    if delta < 1:
        raise ValueError(f"planning horizon must be >= 1, got {delta}")

    stats = SearchStats(max_possible_nodes=max_possible_nodes(len(positions), delta))
    if is_enclosed(grid, positions):
        return idle_plan(positions, delta, 0.0, stats)

    gain = evaluator or GainEvaluator(belief, order=order, max_planned=max_planned)
    idle = idle_plan(positions, delta, 0.0, stats)
    best = gain([c for path in idle.cells for c in path])
    incumbent = (best, tuple(zip(*idle.actions)), idle.cells)
    incumbent_key = _action_key(incumbent[1])
    candidates = [incumbent]

    def tied_behind(prefix, value):
        # A subtree whose bound ties I* can only beat the incumbent if its actions sort first.
        key = _action_key(prefix)
        return value <= best + TIE_EPS and key > incumbent_key[:len(key)]

    root = SearchNode(depth=0, joint_positions=positions, committed_plan=tuple(() for _ in positions), actions=(), g=0.0)
    root.h, root.child_bounds = h_value(belief, root, grid, delta, gain, condition_h_on_plan)

    counter = itertools.count()
    open_list = [(-root.f, 0, (), next(counter), root)]
    while open_list:
        _, _, _, _, node = heapq.heappop(open_list)
        if node.f < best - TIE_EPS:
            break
        if pruning and tied_behind(node.actions, node.f):
            continue
        if node.depth > 0:
            stats.nodes_expanded += 1

        ordered = sorted(node.child_bounds.items(), key=lambda kv: (-kv[1], _action_key((kv[0],))))
        for joint_action, bound in ordered:
            if pruning and node.g + bound < best - TIE_EPS:
                break
            if pruning and tied_behind(node.actions + (joint_action,), node.g + bound):
                continue
            moved = tuple(step_cell(grid, c, a) for c, a in zip(node.joint_positions, joint_action))
            plan = tuple(path + (c,) for path, c in zip(node.committed_plan, moved))
            child = SearchNode(
                depth=node.depth + 1,
                joint_positions=moved,
                committed_plan=plan,
                actions=node.actions + (joint_action,),
                g=gain([c for path in plan for c in path]),
                parent=node,
            )
            stats.nodes_generated += 1

            # Horizon children are complete plans: they update I* as soon as g is known.
            if child.depth >= delta:
                entry = (child.g, child.actions, plan)
                candidates.append(entry)
                best = max(best, child.g)
                if incumbent[0] < best - TIE_EPS:
                    incumbent = _pick(candidates)
                elif child.g >= best - TIE_EPS and _action_key(child.actions) < incumbent_key:
                    incumbent = entry
                incumbent_key = _action_key(incumbent[1])
                continue

            child.h, child.child_bounds = h_value(belief, child, grid, delta, gain, condition_h_on_plan)
            heapq.heappush(
                open_list, (-child.f, -child.depth, _action_key(child.actions), next(counter), child)
            )

    value, steps, cells = incumbent
    logger.debug(
        f"A* over {len(positions)} agents: value={value:.6f} generated={stats.nodes_generated} "
        f"expanded={stats.nodes_expanded} max={stats.max_possible_nodes}"
    )
    return JointPlan(actions=tuple(zip(*steps)), value=value, cells=tuple(cells), stats=stats)


# --- Single-agent forward search ---
def single_agent_forward_search(
    belief,
    position,
    grid,
    delta,
    order=DEFAULT_QUADRATURE_ORDER,
    max_planned=DEFAULT_MAX_PLANNED,
    evaluator=None,
):
    position = int(position)
    if not grid.is_passable(position):
        raise ValueError(f"position {position} is not a passable cell")
    if delta < 1:
        raise ValueError(f"planning horizon must be >= 1, got {delta}")
    if is_enclosed(grid, [position]):
        return idle_plan([position], delta, 0.0, SearchStats())

    gain = evaluator or GainEvaluator(belief, order=order, max_planned=max_planned)
    idle_cells = (position,) * delta
    candidates = [(gain(idle_cells), tuple((Action.IDLE,) for _ in range(delta)), (idle_cells,))]
    for actions, cells in agent_sequences(grid, position, delta):
        candidates.append((gain(cells), tuple((a,) for a in actions), (cells,)))

    value, steps, cells = _pick(candidates)
    return JointPlan(actions=tuple(zip(*steps)), value=value, cells=tuple(cells), stats=SearchStats())
