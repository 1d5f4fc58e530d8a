"""Finite-state oracle and the critic-only baseline.

Discretizing the passive dynamics on a grid turns the exponentiated Bellman
equation into an eigenproblem: z_avg * z = diag(exp(-costs)) @ P @ z, whose
principal pair power iteration finds exactly.  Z-learning reuses the critic
but takes the control-cost matrix straight from the known gain and noise
instead of learning it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import ndtr

from .actor import ActorState, act
from .core import LMDPProblem, SampleSet, true_control_cost_matrix
from .critic import CriticState


@dataclass
class DiscretizedLMDP:
    states: np.ndarray  # (K, n) grid points
    passive_matrix: np.ndarray  # (K, K) row-stochastic
    costs: np.ndarray  # (K,) per-step cost q * dt

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.passive_matrix = np.asarray(self.passive_matrix, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        k = self.states.shape[0]
        if self.passive_matrix.shape != (k, k):
            raise ValueError("transition matrix must be square over the states")
        if self.costs.shape != (k,):
            raise ValueError("need one cost per state")
        row_err = np.abs(self.passive_matrix.sum(axis=1) - 1.0).max()
        if row_err > 1e-12:
            raise ValueError(f"rows must sum to 1 (worst error {row_err:.3e})")
        if self.passive_matrix.min() < 0.0:
            raise ValueError("negative transition probability")
        if self.costs.min() < 0.0:
            raise ValueError("costs must be nonnegative")

    @property
    def n_states(self) -> int:
        return self.states.shape[0]


def _grid_axes(ranges, counts):
    ranges = np.asarray(ranges, dtype=float)
    counts = tuple(int(c) for c in np.atleast_1d(counts))
    if ranges.ndim != 2 or ranges.shape[1] != 2 or ranges.shape[0] != len(counts):
        raise ValueError("ranges must be (n, 2) with one count per dimension")
    if any(c < 2 for c in counts):
        raise ValueError("need at least two grid points per dimension")
    return [np.linspace(lo, hi, c) for (lo, hi), c in zip(ranges, counts)]


def discretize(problem: LMDPProblem, ranges, counts) -> DiscretizedLMDP:
    """Grid approximation of the passive dynamics.

    Each dimension's next-state distribution is integrated over grid cells
    (boundaries at midpoints) with the Gaussian truncated at four standard
    deviations and the row renormalized.  Dimensions without noise split mass
    between the two bracketing grid points in proportion to proximity, which
    keeps the expected displacement exact even when the per-step move is
    smaller than a cell (all-mass-to-nearest would freeze such dimensions).
    Rows of the full matrix are products of the per-dimension cell masses, so
    memory is O(K^2): keep grids small.
    """
    axes = _grid_axes(ranges, counts)
    dyn = problem.dynamics
    mesh = np.meshgrid(*axes, indexing="ij")
    states = np.stack([m.ravel() for m in mesh], axis=1)
    k = states.shape[0]
    drifts = np.stack([dyn.drift(x) for x in states], axis=0)
    means = states + drifts * dyn.dt

    per_dim = []
    for d, axis in enumerate(axes):
        mu = means[:, d]
        sig = dyn.noise[d] * np.sqrt(dyn.dt)
        c = axis.shape[0]
        if sig == 0.0:
            pos = np.interp(mu, axis, np.arange(c, dtype=float))
            left = np.minimum(pos.astype(int), c - 2)
            frac = pos - left
            m = np.zeros((k, c))
            rows = np.arange(k)
            m[rows, left] = 1.0 - frac
            m[rows, left + 1] += frac
            per_dim.append(m)
            continue
        mid = 0.5 * (axis[:-1] + axis[1:])
        lo = np.concatenate(([-np.inf], mid))
        hi = np.concatenate((mid, [np.inf]))
        lo = np.maximum(lo[None, :], (mu - 4.0 * sig)[:, None])
        hi = np.minimum(hi[None, :], (mu + 4.0 * sig)[:, None])
        m = ndtr((hi - mu[:, None]) / sig) - ndtr((lo - mu[:, None]) / sig)
        m = np.maximum(m, 0.0)
        m /= m.sum(axis=1, keepdims=True)
        per_dim.append(m)

    p = per_dim[0]
    for m in per_dim[1:]:
        p = p[:, :, None] * m[:, None, :]
        p = p.reshape(k, -1)
    p /= p.sum(axis=1, keepdims=True)

    costs = np.array([problem.cost(x) * dyn.dt for x in states])
    return DiscretizedLMDP(states, p, costs)


def solve_principal_eigenpair(d: DiscretizedLMDP, tol: float = 1e-10):
    """Power iteration for (z_avg, z) with z > 0 and sum(z) = 1.

    Fails if the transition graph is not strongly connected (the principal
    pair is only guaranteed unique and positive for irreducible chains) or if
    the residual does not reach ``tol`` within 1e5 iterations.
    """
    p = d.passive_matrix
    n_comp, _ = connected_components(csr_matrix(p > 0.0), directed=True, connection="strong")
    if n_comp != 1:
        raise ValueError(f"transition graph has {n_comp} strongly connected components")
    g = np.exp(-d.costs)[:, None] * p
    z = np.full(d.n_states, 1.0 / d.n_states)
    for _ in range(100_000):
        y = g @ z
        lam = float(y.sum())
        if lam <= 0.0:
            raise RuntimeError("iterate collapsed to zero")
        if float(np.abs(y - lam * z).max()) <= tol:
            return lam, z
        z = y / lam
    raise RuntimeError(f"power iteration did not reach tol={tol} in 100000 iterations")


def sample_chain(d: DiscretizedLMDP, count: int, rng: np.random.Generator) -> SampleSet:
    """Independent transitions with uniformly drawn source states."""
    cum = np.cumsum(d.passive_matrix, axis=1)
    i = rng.integers(d.n_states, size=count)
    u = rng.random(count)
    j = np.minimum((cum[i] < u[:, None]).sum(axis=1), d.n_states - 1)
    return SampleSet(d.states[i], d.states[j], d.costs[i])


def zlearning_policy(critic: CriticState, input_gain, noise, clamp=None, counters=None):
    """Policy from a critic snapshot with S computed from known gain and noise.

    Shares the actor's action path so that a pAC actor holding the same S
    produces bit-identical actions.
    """
    s = true_control_cost_matrix(input_gain, noise)
    holder = ActorState(s_hat=s, beta=1.0)
    gain = np.asarray(input_gain, dtype=float)

    def policy(x):
        return act(holder, critic, x, gain, clamp=clamp, counters=counters)

    return policy


def estimate_sigma_residual(samples: SampleSet, dt: float, bins: int = 12,
                            min_count: int = 8) -> np.ndarray:
    """Per-dimension noise scale from passive-sample residuals.

    The per-step displacement is demeaned within cells of a ``bins``-per-axis
    grid over the data bounding box (a local estimate of drift * dt), and the
    pooled residual standard deviation is divided by sqrt(dt).  Cells with
    fewer than ``min_count`` samples are skipped.  This is a deliberately
    simple estimator: it needs cells small enough that drift is near-constant
    inside, yet populated enough to average the noise.
    """
    if len(samples) < 1000:
        raise ValueError("need at least 1000 samples")
    xs = samples.xs
    disp = samples.x_nexts - xs
    lo = xs.min(axis=0)
    span = xs.max(axis=0) - lo
    span[span == 0.0] = 1.0
    idx = np.clip((((xs - lo) / span) * bins).astype(np.int64), 0, bins - 1)
    cell = np.zeros(len(samples), dtype=np.int64)
    for d in range(xs.shape[1]):
        cell = cell * bins + idx[:, d]
    uniq, inv, counts = np.unique(cell, return_inverse=True, return_counts=True)
    sums = np.zeros((uniq.shape[0], xs.shape[1]))
    np.add.at(sums, inv, disp)
    resid = disp - sums[inv] / counts[inv, None]
    kept = counts[inv] >= min_count
    n_kept = int(kept.sum())
    if n_kept == 0:
        raise ValueError(f"no grid cell holds {min_count}+ samples; coarsen bins")
    n_cells = int((counts >= min_count).sum())
    var = (resid[kept] ** 2).sum(axis=0) / max(n_kept - n_cells, 1)
    return np.sqrt(var / dt)
