# utils/info_utils.py

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.linalg import cholesky, solve_triangular

from utils.belief_utils import JITTER, PROB_EPS, phenomenon_probability

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE_ORDER = 5
MAX_QUADRATURE_ORDER = 64
DEFAULT_MAX_PLANNED = 6

# Upper bound on (cells x quadrature nodes) evaluated per chunk.
_CHUNK_ELEMENTS = 1 << 22


class QuadratureBudgetError(ValueError):
    def __init__(self, planned, cap):
        super().__init__(
            f"plan has {planned} planned observations, quadrature budget allows {cap}"
        )
        self.planned = planned
        self.cap = cap


@dataclass(frozen=True)
class QuadratureRule:
    """Probabilists'-normalized Gauss-Hermite rule: sum(w * f(mu + sigma * x)) ~ E[f(Y)]."""
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def expect(self, f, mu=0.0, sigma=1.0):
        return float(np.sum(self.weights * f(mu + sigma * self.nodes)))


@dataclass(frozen=True)
class ObservationPlan:
    """Per-agent future cells, one entry per planned step (start cell excluded)."""
    paths: tuple

    @classmethod
    def of(cls, *paths):
        return cls(paths=tuple(tuple(int(c) for c in p) for p in paths))

    @property
    def horizon(self):
        return max((len(p) for p in self.paths), default=0)

    @property
    def num_observations(self):
        return sum(len(p) for p in self.paths)

    def flat_cells(self):
        return [c for p in self.paths for c in p]

    def canonical_cells(self):
        # Expected gain depends only on the multiset of cells.
        return tuple(sorted(self.flat_cells()))


# --- Bernoulli KL ---
def bernoulli_kl(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    kl = p * np.log(p / q) + (1.0 - p) * np.log((1.0 - p) / (1.0 - q))
    return float(kl) if kl.ndim == 0 else kl


# --- Gauss-Hermite ---
@lru_cache(maxsize=None)
def gauss_hermite(order):
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_QUADRATURE_ORDER:
        raise ValueError(f"unsupported quadrature order {order!r} (1..{MAX_QUADRATURE_ORDER})")
    x, w = hermgauss(int(order))
    nodes = x * np.sqrt(2.0)
    weights = w / np.sqrt(np.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=int(order))


@lru_cache(maxsize=64)
def _tensor_rule(order, dims):
    """Tensor-product nodes (dims, order**dims) and weights in itertools.product order."""
    rule = gauss_hermite(order)
    z = np.array(list(itertools.product(rule.nodes, repeat=dims)), dtype=float).reshape(-1, dims).T
    w = reduce(np.kron, [rule.weights] * dims) if dims else np.ones(1)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w


# --- Expected information gain ---
def expected_info_gain(belief, plan, ph=None, order=DEFAULT_QUADRATURE_ORDER, max_planned=DEFAULT_MAX_PLANNED):
    """
    sum_i E_Y[ KL( p(X_i | Y_plan, history) || p(X_i | history) ) ] in nats.

    Planned observations are integrated with a tensor-product Gauss-Hermite rule. Standard
    nodes are mapped through the Cholesky factor of the predictive covariance, which is the
    same as conditioning a belief clone on each node's synthetic values one after another.
    """
    cells = plan.canonical_cells() if isinstance(plan, ObservationPlan) else tuple(sorted(plan))
    return gain_for_cells(belief, cells, ph=ph, order=order, max_planned=max_planned)


def gain_for_cells(belief, cells, ph=None, order=DEFAULT_QUADRATURE_ORDER, max_planned=DEFAULT_MAX_PLANNED):
    k = len(cells)
    if k == 0:
        return 0.0
    if k > max_planned:
        raise QuadratureBudgetError(k, max_planned)
    ph = ph or belief.phenomenon

    slots = belief.slots_for(cells)
    cross = belief.cross_cov(slots)                       # (n, k)
    s = cross[slots] + belief.gp.gram_noise * np.eye(k)   # predictive covariance of Y
    s = 0.5 * (s + s.T)
    try:
        l_s = cholesky(s, lower=True)
    except np.linalg.LinAlgError:
        l_s = cholesky(s + JITTER * np.eye(k), lower=True)

    # Posterior mean shift per unit standard node, and posterior variance after the plan.
    b = solve_triangular(l_s, cross.T, lower=True).T      # (n, k)
    relevant = np.flatnonzero(np.any(b != 0.0, axis=1))
    if relevant.size == 0:
        return 0.0
    b = b[relevant]
    mean = belief.posterior_mean[relevant]
    var_after = np.maximum(belief.posterior_var[relevant] - np.sum(b ** 2, axis=1), 0.0)
    p_prior = np.clip(belief.phenomenon_prob[relevant], PROB_EPS, 1.0 - PROB_EPS)
    if ph != belief.phenomenon:
        p_prior = np.clip(
            phenomenon_probability(mean, belief.posterior_var[relevant], ph), PROB_EPS, 1.0 - PROB_EPS
        )

    z, w = _tensor_rule(int(order), k)
    chunk = max(1, _CHUNK_ELEMENTS // relevant.size)
    total = 0.0
    for start in range(0, w.size, chunk):
        zc, wc = z[:, start:start + chunk], w[start:start + chunk]
        mean_after = mean[:, None] + b @ zc
        p_after = phenomenon_probability(mean_after, var_after[:, None], ph)
        kl = bernoulli_kl(p_after, p_prior[:, None])
        total += float(np.sum(kl, axis=0) @ wc)
    return max(total, 0.0)


class GainEvaluator:
    """Memoized expected gain for one belief, keyed by the sorted multiset of planned cells."""

    def __init__(self, belief, order=DEFAULT_QUADRATURE_ORDER, max_planned=DEFAULT_MAX_PLANNED):
        self.belief = belief
        self.order = order
        self.max_planned = max_planned
        self.cache = {}
        self.evaluations = 0

    def __call__(self, cells):
        key = tuple(sorted(cells))
        if key not in self.cache:
            self.cache[key] = gain_for_cells(
                self.belief, key, order=self.order, max_planned=self.max_planned
            )
            self.evaluations += 1
        return self.cache[key]
