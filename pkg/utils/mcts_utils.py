# utils/mcts_utils.py

import logging
import math
from dataclasses import dataclass, field

from utils.info_utils import DEFAULT_MAX_PLANNED, DEFAULT_QUADRATURE_ORDER, GainEvaluator
from utils.search_utils import (
    TIE_EPS,
    JointPlan,
    SearchStats,
    is_enclosed,
    idle_plan,
    joint_children,
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class MCTSNode:
    joint_action: tuple
    positions: tuple
    visits: int = 0
    value_sum: float = 0.0
    max_value: float = -math.inf
    best_rollout: tuple = ()
    continuations: list = field(default_factory=list)

    @property
    def mean(self):
        return self.value_sum / self.visits if self.visits else -math.inf

    def backpropagate(self, reward, rollout):
        self.visits += 1
        self.value_sum += reward
        if reward > self.max_value:
            self.max_value = reward
            self.best_rollout = rollout


def _continuations(grid, positions, steps):
    """Every collision-free joint continuation (list of (joint_action, positions) steps)."""
    if steps == 0:
        return [()]
    out = []
    for joint_action, moved, _ in joint_children(grid, positions):
        for rest in _continuations(grid, moved, steps - 1):
            out.append(((joint_action, moved),) + rest)
    return out


def _random_rollout(grid, positions, steps, rng):
    rollout = []
    for _ in range(steps):
        children = joint_children(grid, positions)
        joint_action, positions, _ = children[int(rng.integers(len(children)))]
        rollout.append((joint_action, positions))
    return tuple(rollout)


def _select(children, total_visits, exploration, exhaustive):
    for child in children:
        if child.visits == 0:
            return child
        if exhaustive and child.visits < len(child.continuations):
            return child
    log_total = math.log(total_visits)
    return max(children, key=lambda c: c.mean + exploration * math.sqrt(log_total / c.visits))


def mcts_search(
    belief,
    positions,
    grid,
    delta,
    rng,
    iterations=500,
    exploration=1.0,
    exhaustive=False,
    selection="mean",
    order=DEFAULT_QUADRATURE_ORDER,
    max_planned=DEFAULT_MAX_PLANNED,
    evaluator=None,
):
    """
    UCT over the bubble's joint actions at the root. Each iteration picks a root child,
    completes it with a uniformly random collision-free continuation to depth delta and
    scores the rolled-out plan by its expected information gain.
    """
    positions = tuple(int(p) for p in positions)
    if selection not in ("mean", "max"):
        raise ValueError(f"unknown MCTS selection rule {selection!r}")
    if iterations < 1:
        raise ValueError(f"MCTS needs at least one iteration, got {iterations}")
    if is_enclosed(grid, positions):
        return idle_plan(positions, delta, 0.0, SearchStats())

    gain = evaluator or GainEvaluator(belief, order=order, max_planned=max_planned)
    children = [MCTSNode(joint_action=ja, positions=moved) for ja, moved, _ in joint_children(grid, positions)]
    if exhaustive:
        for child in children:
            child.continuations = _continuations(grid, child.positions, delta - 1)

    root_visits = 0
    for _ in range(iterations):
        child = _select(children, max(root_visits, 1), exploration, exhaustive)
        if exhaustive:
            rollout = child.continuations[child.visits % len(child.continuations)]
        else:
            rollout = _random_rollout(grid, child.positions, delta - 1, rng)
        steps = ((child.joint_action, child.positions),) + rollout
        cells = [moved[j] for j in range(len(positions)) for _, moved in steps]
        child.backpropagate(gain(cells), rollout)
        root_visits += 1

    visited = [c for c in children if c.visits]
    score = (lambda c: c.mean) if selection == "mean" else (lambda c: c.max_value)
    top = max(score(c) for c in visited)
    chosen = next(c for c in visited if score(c) >= top - TIE_EPS)

    steps = ((chosen.joint_action, chosen.positions),) + chosen.best_rollout
    actions = tuple(tuple(ja[j] for ja, _ in steps) for j in range(len(positions)))
    cells = tuple(tuple(moved[j] for _, moved in steps) for j in range(len(positions)))
    logger.debug(f"MCTS over {len(positions)} agents: {root_visits} iterations, chosen {chosen.joint_action}")
    return JointPlan(actions=actions, value=score(chosen), cells=cells, stats=SearchStats())
