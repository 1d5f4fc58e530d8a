"""Core types and stepping for continuous linearly-solvable MDPs.

States and actions are plain float64 numpy vectors.  Dynamics follow the
Euler-Maruyama form

    x' = x + A(x) dt + B u dt + diag(sigma) dw,   dw ~ N(0, I dt),

with additive control through the input gain ``B`` and noise entering only
through ``sigma``.  The control-cost matrix S couples the two via
S^-1 = sum_i b_i b_i^T / sigma_i^2 over the noisy dimensions, which makes the
Bellman equation linear in Z = exp(-V) and the optimal action
u = -S B^T grad V.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

log = logging.getLogger(__name__)


class ControlObservabilityError(ValueError):
    """No noisy state dimension is driven by the control input."""


@dataclass(frozen=True)
class DynamicsModel:
    """Passive drift, input gain, noise scales, and step size of one system.

    drift: maps a state vector (n,) to the drift vector A(x) (n,).
    input_gain: B, shape (n, m).
    noise: per-dimension sigma, shape (n,), entries >= 0.
    dt: step size in seconds, > 0.
    """

    drift: Callable[[np.ndarray], np.ndarray]
    input_gain: np.ndarray
    noise: np.ndarray
    dt: float

    def __post_init__(self):
        gain = np.asarray(self.input_gain, dtype=float)
        if gain.ndim != 2:
            raise ValueError("input_gain must be a 2-D (n, m) array")
        noise = np.asarray(self.noise, dtype=float)
        if noise.ndim != 1 or noise.shape[0] != gain.shape[0]:
            raise ValueError("noise must be a 1-D array matching input_gain rows")
        if np.any(noise < 0.0):
            raise ValueError("noise scales must be nonnegative")
        if not (self.dt > 0.0):
            raise ValueError("dt must be positive")
        object.__setattr__(self, "input_gain", gain)
        object.__setattr__(self, "noise", noise)

    @property
    def dim(self) -> int:
        return self.input_gain.shape[0]

    @property
    def action_dim(self) -> int:
        return self.input_gain.shape[1]


@dataclass
class CostCounters:
    """Running diagnostics for state-cost clamping."""

    clamps: int = 0
    _warned: bool = field(default=False, repr=False)


@dataclass(frozen=True)
class LMDPProblem:
    """A dynamics model, a nonnegative state cost, and an initial region.

    state_cost maps a state to a scalar; negative raw values are clamped to 0
    by :meth:`cost` (counted in ``counters``, warned once).  init_region is an
    (n, 2) array of [low, high] bounds used for start-state sampling.
    """

    dynamics: DynamicsModel
    state_cost: Callable[[np.ndarray], float]
    init_region: np.ndarray
    name: str = ""
    counters: CostCounters = field(default_factory=CostCounters, compare=False)

    def __post_init__(self):
        region = np.asarray(self.init_region, dtype=float)
        if region.shape != (self.dynamics.dim, 2):
            raise ValueError("init_region must have shape (n, 2)")
        if np.any(region[:, 0] > region[:, 1]):
            raise ValueError("init_region lows must not exceed highs")
        object.__setattr__(self, "init_region", region)

    def cost(self, x: np.ndarray) -> float:
        """Clamped state cost q(x) >= 0."""
        q = float(self.state_cost(x))
        if not math.isfinite(q):
            raise ValueError(f"state cost is not finite at {x!r}")
        if q < 0.0:
            if not self.counters._warned:
                log.warning("negative state cost clamped to 0 (counting further hits)")
                self.counters._warned = True
            self.counters.clamps += 1
            return 0.0
        return q

    def sample_init(self, rng: np.random.Generator) -> np.ndarray:
        region = self.init_region
        return rng.uniform(region[:, 0], region[:, 1])


@dataclass(frozen=True)
class PassiveSample:
    """One passive transition: state, next state, and cost increment q(x_k) dt."""

    x: np.ndarray
    x_next: np.ndarray
    q: float

    def __post_init__(self):
        if self.q < 0.0:
            raise ValueError("cost increment must be nonnegative")


@dataclass
class SampleSet:
    """Column-array batch of passive transitions (indexable as PassiveSample)."""

    xs: np.ndarray
    x_nexts: np.ndarray
    qs: np.ndarray

    def __post_init__(self):
        if not (self.xs.shape == self.x_nexts.shape and self.xs.shape[0] == self.qs.shape[0]):
            raise ValueError("mismatched sample arrays")
        if np.any(self.qs < 0.0):
            raise ValueError("cost increments must be nonnegative")

    def __len__(self) -> int:
        return self.xs.shape[0]

    def __getitem__(self, i: int) -> PassiveSample:
        return PassiveSample(self.xs[i], self.x_nexts[i], float(self.qs[i]))

    def __iter__(self) -> Iterator[PassiveSample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @classmethod
    def concatenate(cls, parts: "list[SampleSet]") -> "SampleSet":
        return cls(
            np.concatenate([p.xs for p in parts]),
            np.concatenate([p.x_nexts for p in parts]),
            np.concatenate([p.qs for p in parts]),
        )


def step_passive(model: DynamicsModel, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One uncontrolled Euler-Maruyama step.

    Always draws dim standard normals so that paired runs consume the same
    stream regardless of zero noise entries.
    """
    drift = np.asarray(model.drift(x), dtype=float)
    if drift.shape != x.shape:
        raise ValueError("drift output shape does not match state")
    if not np.all(np.isfinite(drift)):
        bad = int(np.flatnonzero(~np.isfinite(drift))[0])
        raise FloatingPointError(f"non-finite drift in dimension {bad} at {x!r}")
    w = rng.standard_normal(model.dim)
    return x + drift * model.dt + model.noise * (math.sqrt(model.dt) * w)


def step_controlled(
    model: DynamicsModel, x: np.ndarray, u: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One controlled step: the passive step plus B u dt, same noise semantics."""
    return step_passive(model, x, rng) + model.input_gain @ (np.asarray(u, dtype=float) * model.dt)


def true_control_cost_matrix(input_gain: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """S = (sum over noisy dims of b_i b_i^T / sigma_i^2)^-1.

    Dimensions with sigma_i = 0 carry no information about the control cost
    and are excluded from the sum; raises ControlObservabilityError when the
    remaining sum is singular (control invisible through the noisy dims).
    """
    gain = np.asarray(input_gain, dtype=float)
    sig = np.asarray(noise, dtype=float)
    noisy = sig > 0.0
    if not noisy.any():
        raise ControlObservabilityError("all noise scales are zero")
    rows = gain[noisy] / sig[noisy, None]
    s_inv = rows.T @ rows
    m = gain.shape[1]
    if np.linalg.matrix_rank(s_inv) < m:
        raise ControlObservabilityError("control is not observable through noisy dimensions")
    return np.linalg.inv(s_inv)


def control_cost(u: np.ndarray, s_matrix: np.ndarray, dt: float) -> float:
    """Quadratic control cost 0.5 u^T S^-1 u dt."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    s = np.atleast_2d(np.asarray(s_matrix, dtype=float))
    return 0.5 * float(u @ np.linalg.solve(s, u)) * dt


def total_cost(problem: LMDPProblem, x: np.ndarray, u: np.ndarray, s_matrix: np.ndarray) -> float:
    """Per-step cost q(x) dt + 0.5 u^T S^-1 u dt."""
    dt = problem.dynamics.dt
    return problem.cost(x) * dt + control_cost(u, s_matrix, dt)


def policy_action(s_hat: np.ndarray, input_gain: np.ndarray, grad_v: np.ndarray) -> np.ndarray:
    """Greedy action u = -S_hat B^T grad_V."""
    return -(np.atleast_2d(s_hat) @ (input_gain.T @ grad_v))
