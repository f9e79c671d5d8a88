# utils/belief_utils.py

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import erf

logger = logging.getLogger(__name__)

# Clamp for phenomenon probabilities before any KL / log.
PROB_EPS = 1e-12

# Added to Gram diagonals when sigma == 0.
JITTER = 1e-10


class BeliefError(ValueError):
    pass


@dataclass(frozen=True)
class GPHyperparams:
    theta1: float = 0.4
    theta2: float = 0.01
    sigma: float = 0.2
    mean: float = 1.0

    def __post_init__(self):
        if not self.theta1 > 0:
            raise ValueError(f"theta1 must be > 0, got {self.theta1}")
        if not self.theta2 > 0:
            raise ValueError(f"theta2 must be > 0, got {self.theta2}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def noise_var(self):
        return self.sigma ** 2

    @property
    def gram_noise(self):
        return self.sigma ** 2 if self.sigma > 0 else JITTER

    def kernel(self, xa, xb):
        """k(x, x') = theta1 * exp(-||x - x'||^2 / theta2^2) over grid coordinates."""
        sq = cdist(np.atleast_2d(xa), np.atleast_2d(xb), metric="sqeuclidean")
        return self.theta1 * np.exp(-sq / self.theta2 ** 2)


@dataclass(frozen=True)
class PhenomenonParams:
    u_tilde: float = 1.4
    p1: float = 0.98
    p2: float = 0.002

    def __post_init__(self):
        if not 0.0 <= self.p2 <= self.p1 <= 1.0:
            raise ValueError(f"need 0 <= p2 <= p1 <= 1, got p1={self.p1}, p2={self.p2}")


@dataclass(frozen=True)
class Observation:
    cell: int
    value: float
    time: int
    agent_id: int

    @property
    def identity(self):
        return (self.agent_id, self.time)


@dataclass(frozen=True)
class PredictiveGaussian:
    mean: np.ndarray
    cov: np.ndarray


# --- Phenomenon probability (erf link) ---
def phenomenon_probability(mu, var, ph):
    mu = np.asarray(mu, dtype=float)
    var = np.maximum(np.asarray(var, dtype=float), 0.0)
    diff = ph.u_tilde - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / np.sqrt(2.0 * var)
    # Zero variance: the posterior is a point mass, so the link is a step at u_tilde.
    step = np.where(diff > 0, np.inf, np.where(diff < 0, -np.inf, 0.0))
    z = np.where(var > 0, z, step)
    e = erf(z)
    p = 0.5 * ph.p1 * (1.0 - e) + 0.5 * ph.p2 * (1.0 + e)
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(p) if p.ndim == 0 else p


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BeliefState:
    """
    GP posterior over the passable cells of a grid.

    The posterior is kept factored: `chol` is the Cholesky factor L of the noisy Gram
    matrix of `history`, `proj` = L^-1 K(obs, cells) and `resid` = L^-1 (y - mean).
    Means, variances and any joint block are derived from those three arrays.
    Instances are values; `condition` returns a new belief.
    """
    grid: object
    gp: GPHyperparams
    phenomenon: PhenomenonParams
    slot_index: np.ndarray
    coords: np.ndarray
    history: tuple
    chol: np.ndarray
    proj: np.ndarray
    resid: np.ndarray
    posterior_mean: np.ndarray
    posterior_var: np.ndarray
    phenomenon_prob: np.ndarray

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def cells(self):
        return np.flatnonzero(self.slot_index >= 0)

    def slots_for(self, cells):
        cells = np.asarray(cells, dtype=int).reshape(-1)
        if cells.size and (cells.min() < 0 or cells.max() >= self.slot_index.size):
            raise BeliefError(f"cell out of range in {cells.tolist()}")
        slots = self.slot_index[cells]
        if (slots < 0).any():
            bad = cells[slots < 0].tolist()
            raise BeliefError(f"cells {bad} are blocked and carry no belief")
        return slots

    def cov_between(self, slots_a, slots_b):
        k = self.gp.kernel(self.coords[slots_a], self.coords[slots_b])
        return k - self.proj[:, slots_a].T @ self.proj[:, slots_b]

    def cross_cov(self, slots):
        """(n, k) posterior covariance between every cell and the given slots."""
        return self.cov_between(np.arange(self.n), slots)

    @property
    def posterior_cov(self):
        everything = np.arange(self.n)
        return self.cov_between(everything, everything)

    def marginal(self, cell):
        slot = self.slots_for([cell])[0]
        return float(self.posterior_mean[slot]), float(self.posterior_var[slot])

    def prob_at(self, cell):
        return float(self.phenomenon_prob[self.slots_for([cell])[0]])


def _build(belief, **changes):
    fields = {
        "grid": belief.grid,
        "gp": belief.gp,
        "phenomenon": belief.phenomenon,
        "slot_index": belief.slot_index,
        "coords": belief.coords,
        "history": belief.history,
        "chol": belief.chol,
        "proj": belief.proj,
        "resid": belief.resid,
        "posterior_mean": belief.posterior_mean,
        "posterior_var": belief.posterior_var,
    }
    fields.update(changes)
    for key in ("chol", "proj", "resid", "posterior_mean", "posterior_var"):
        fields[key] = _frozen(fields[key])
    fields["phenomenon_prob"] = _frozen(
        phenomenon_probability(fields["posterior_mean"], fields["posterior_var"], fields["phenomenon"])
    )
    return BeliefState(**fields)


# --- Prior ---
def prior_belief(grid, gp, ph):
    passable = np.asarray(grid.passable_cells, dtype=int)
    slot_index = np.full(grid.size, -1, dtype=int)
    slot_index[passable] = np.arange(passable.size)
    slot_index.setflags(write=False)
    coords = grid.coordinates(passable)
    coords.setflags(write=False)
    n = passable.size

    seed = BeliefState(
        grid=grid, gp=gp, phenomenon=ph, slot_index=slot_index, coords=coords,
        history=(), chol=np.zeros((0, 0)), proj=np.zeros((0, n)), resid=np.zeros(0),
        posterior_mean=np.full(n, gp.mean), posterior_var=np.full(n, gp.theta1),
        phenomenon_prob=np.zeros(n),
    )
    return _build(seed)


# --- Conditioning (block Cholesky update) ---
def condition(belief, obs):
    obs = list(obs)
    if not obs:
        return belief

    for o in obs:
        if not math.isfinite(o.value):
            raise BeliefError(f"observation {o.identity} has non-finite value {o.value}")
    new = belief.slots_for([o.cell for o in obs])
    y = np.array([o.value for o in obs], dtype=float)
    gp = belief.gp

    k_new_all = gp.kernel(belief.coords[new], belief.coords)
    k_new_new = k_new_all[:, new] + gp.gram_noise * np.eye(new.size)
    b = belief.proj[:, new]

    # Raises LinAlgError if the Gram update is not positive definite.
    c = cholesky(k_new_new - b.T @ b, lower=True)
    proj_new = solve_triangular(c, k_new_all - b.T @ belief.proj, lower=True)
    resid_new = solve_triangular(c, (y - gp.mean) - b.T @ belief.resid, lower=True)

    m = belief.chol.shape[0]
    chol = np.zeros((m + new.size, m + new.size))
    chol[:m, :m] = belief.chol
    chol[m:, :m] = b.T
    chol[m:, m:] = c

    return _build(
        belief,
        history=belief.history + tuple(obs),
        chol=chol,
        proj=np.vstack([belief.proj, proj_new]),
        resid=np.concatenate([belief.resid, resid_new]),
        posterior_mean=belief.posterior_mean + proj_new.T @ resid_new,
        posterior_var=np.maximum(belief.posterior_var - np.sum(proj_new ** 2, axis=0), 0.0),
    )


def predictive_marginal(belief, cells):
    """Joint Gaussian over prospective measurements Y at `cells`."""
    slots = belief.slots_for(cells)
    cov = belief.cov_between(slots, slots) + belief.gp.noise_var * np.eye(slots.size)
    return PredictiveGaussian(mean=belief.posterior_mean[slots].copy(), cov=cov)
