"""Temporal-difference learning of Z = exp(-V) and its average-cost factor.

The TD error for a passive transition (x, x', q) is

    e = z_avg Z(x) - min(1, exp(-q) Z(x')),

with the target clamped at one so the learned Z respects Z(x) <= 1 / z_avg.
The scalar z_avg follows e with its own rate and stays in (0, 1].  Mass-based
approximators (RBF, tabular) are updated under nonnegativity, a fixed total
mass, and the cap constraint via an exact projection; network parameters take
a plain gradient step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._kernels import project_simplex_cap
from .approximators import RbfZApproximator, TabularZApproximator
from .core import PassiveSample

Z_FLOOR = 1e-8


class ProjectionError(RuntimeError):
    """The constrained weight update could not reach feasibility."""


@dataclass(frozen=True)
class CriticTD:
    """TD error along with the Z values it was computed from."""

    e: float
    z_k: float
    z_next: float


@dataclass
class CriticState:
    """Approximator, average-cost factor, and learning rates.

    total_mass is the fixed integral (sum of weights) enforced for mass-based
    approximators; decay_tau enables 1 / (1 + i / tau) rate decay.
    """

    approx: object
    alpha1: float
    alpha2: float
    z_avg: float = 1.0
    total_mass: float = 1.0
    decay_tau: float | None = None
    iteration: int = 0

    def rate(self, base: float) -> float:
        if self.decay_tau is None:
            return base
        return base / (1.0 + self.iteration / self.decay_tau)

    @property
    def v_avg(self) -> float:
        return -math.log(self.z_avg)

    def clone(self) -> "CriticState":
        return CriticState(
            self.approx.clone(),
            self.alpha1,
            self.alpha2,
            self.z_avg,
            self.total_mass,
            self.decay_tau,
            self.iteration,
        )


def td_error(critic: CriticState, z_k: float, z_next: float, q: float) -> CriticTD:
    target = math.exp(-q) * z_next
    if target > 1.0:
        target = 1.0
    return CriticTD(critic.z_avg * z_k - target, z_k, z_next)


def critic_td(critic: CriticState, sample: PassiveSample) -> CriticTD:
    """TD error of one passive sample under the current critic."""
    z_k = critic.approx.value(sample.x)
    z_next = critic.approx.value(sample.x_next)
    return td_error(critic, z_k, z_next, sample.q)


def update_z_avg(critic: CriticState, td: CriticTD) -> CriticState:
    """z_avg <- z_avg - 2 alpha1 e Z(x), clamped into (0, 1]."""
    z = critic.z_avg - 2.0 * critic.rate(critic.alpha1) * td.e * td.z_k
    critic.z_avg = min(1.0, max(Z_FLOOR, z))
    return critic


def update_params_nn(
    critic: CriticState, sample: PassiveSample, *, td=None, grad_params=None
) -> CriticTD:
    """Unconstrained step along -2 e z_avg dZ/dparams (network critics)."""
    if td is None or grad_params is None:
        q = critic.approx.query(sample.x)
        td = td_error(critic, q.value, critic.approx.value(sample.x_next), sample.q)
        grad_params = q.grad_params
    step = 2.0 * critic.rate(critic.alpha2) * td.e * critic.z_avg
    p = critic.approx.params
    p -= step * grad_params
    return td


def update_params_rbf(
    critic: CriticState, sample: PassiveSample, *, td=None, feats=None
) -> CriticTD:
    """Constrained step for mass-based critics.

    Takes the same gradient step as the network update, then projects the
    weights onto {w >= 0, sum w = total_mass, Z(x) <= 1 / z_avg}; the basis
    activations double as the parameter gradient.
    """
    if td is None or feats is None:
        q = critic.approx.query(sample.x)
        td = td_error(critic, q.value, critic.approx.value(sample.x_next), sample.q)
        feats = q.grad_params
    w = critic.approx.params
    step = 2.0 * critic.rate(critic.alpha2) * td.e * critic.z_avg
    w -= step * feats
    used = project_simplex_cap(w, critic.total_mass, feats, 1.0 / critic.z_avg, 100)
    if used < 0:
        raise ProjectionError(
            "weight projection failed: "
            f"sum={w.sum()!r} target={critic.total_mass!r} min={w.min()!r} "
            f"cap={1.0 / critic.z_avg!r} reached={float(w @ feats)!r}"
        )
    return td


def is_mass_based(approx) -> bool:
    return isinstance(approx, (RbfZApproximator, TabularZApproximator))


def critic_step(critic: CriticState, x, x_next, q, *, query_k=None) -> CriticTD:
    """One full critic iteration: TD error, parameter update, z_avg update.

    ``query_k`` may pass a precomputed query at x (shared with the actor).
    Parameter and z_avg updates both use pre-update values, and the parameter
    update runs first.
    """
    if query_k is None:
        query_k = critic.approx.query(x)
    z_next = critic.approx.value(x_next)
    td = td_error(critic, query_k.value, z_next, q)
    sample = None
    if is_mass_based(critic.approx):
        update_params_rbf(critic, sample, td=td, feats=query_k.grad_params)
    else:
        update_params_nn(critic, sample, td=td, grad_params=query_k.grad_params)
    update_z_avg(critic, td)
    critic.iteration += 1
    return td
