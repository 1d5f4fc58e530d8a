"""Estimation of the control-cost matrix S from passive data.

The actor evaluates the greedy action u = -S_hat B^T grad V under the current
critic, forms the controlled next state x~ = x' + B u dt, and descends the
squared consistency error

    d = q + 0.5 g^T B S_hat B^T g dt + V(x~) - V_avg - V(x),   g = grad V(x).

``gradient_mode`` picks the derivative of d in S_hat: "full" includes the
chain term through x~, "semi" keeps only the control-cost term.  S_hat stays
symmetric positive semidefinite, with a scalar floor in the 1-D input case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approximators import ZUnderflowError, v_and_grad
from .core import policy_action
from .critic import CriticState

S_FLOOR = 1e-6

_MODES = ("full", "semi")


@dataclass(frozen=True)
class ActorTD:
    """Consistency error, the action evaluated, and the controlled next state."""

    d: float
    u_hat: np.ndarray
    x_tilde: np.ndarray


@dataclass
class ActorState:
    s_hat: np.ndarray  # (m, m)
    beta: float
    gradient_mode: str = "full"
    decay_tau: float | None = None
    iteration: int = 0

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.s_hat, dtype=float))
        if s.shape[0] != s.shape[1]:
            raise ValueError("s_hat must be square")
        if self.gradient_mode not in _MODES:
            raise ValueError(f"gradient_mode must be one of {_MODES}")
        self.s_hat = s

    def rate(self) -> float:
        if self.decay_tau is None:
            return self.beta
        return self.beta / (1.0 + self.iteration / self.decay_tau)

    def clone(self) -> "ActorState":
        return ActorState(
            self.s_hat.copy(), self.beta, self.gradient_mode, self.decay_tau, self.iteration
        )


def actor_td(
    actor: ActorState,
    critic: CriticState,
    x: np.ndarray,
    x_next: np.ndarray,
    q: float,
    input_gain: np.ndarray,
    dt: float,
) -> ActorTD:
    """Consistency error of one sample; raises ZUnderflowError off-support."""
    v_k, g = v_and_grad(critic.approx, x)
    return _actor_td_with_grad(actor, critic, v_k, g, x_next, q, input_gain, dt)


def _actor_td_with_grad(actor, critic, v_k, g, x_next, q, input_gain, dt) -> ActorTD:
    u_hat = policy_action(actor.s_hat, input_gain, g)
    x_tilde = x_next + input_gain @ (u_hat * dt)
    v_tilde = _v_of(critic, x_tilde)
    h = input_gain.T @ g
    d = q + 0.5 * float(h @ actor.s_hat @ h) * dt + v_tilde - critic.v_avg - v_k
    return ActorTD(d, u_hat, x_tilde)


def _v_of(critic: CriticState, x: np.ndarray) -> float:
    z = critic.approx.value(x)
    if z <= 1e-300:
        raise ZUnderflowError(f"Z underflow ({z!r}) at state {x!r}")
    return -float(np.log(z))


def d_gradient(
    actor: ActorState,
    critic: CriticState,
    td: ActorTD,
    g: np.ndarray,
    input_gain: np.ndarray,
    dt: float,
) -> np.ndarray:
    """dd / dS_hat, symmetrized; g is grad V at the sample state."""
    h = input_gain.T @ g
    m = 0.5 * dt * np.outer(h, h)
    if actor.gradient_mode == "full":
        _, g_tilde = v_and_grad(critic.approx, td.x_tilde)
        m = m - dt * np.outer(input_gain.T @ g_tilde, h)
    return 0.5 * (m + m.T)


def update_s(
    actor: ActorState,
    critic: CriticState,
    td: ActorTD,
    x: np.ndarray,
    input_gain: np.ndarray,
    dt: float,
    *,
    grad_v: np.ndarray | None = None,
) -> ActorState:
    """S_hat <- psd_project(S_hat - 2 beta d dd/dS_hat)."""
    if grad_v is None:
        _, grad_v = v_and_grad(critic.approx, x)
    m = d_gradient(actor, critic, td, grad_v, input_gain, dt)
    s_new = actor.s_hat - 2.0 * actor.rate() * td.d * m
    actor.s_hat = project_psd(s_new)
    actor.iteration += 1
    return actor


def project_psd(s: np.ndarray) -> np.ndarray:
    """Nearest symmetric PSD matrix; scalars are floored at S_FLOOR."""
    s = 0.5 * (s + s.T)
    if s.shape == (1, 1):
        return np.array([[max(S_FLOOR, s[0, 0])]])
    vals, vecs = np.linalg.eigh(s)
    clipped = np.clip(vals, 0.0, None)
    return (vecs * clipped) @ vecs.T


def act(
    actor: ActorState,
    critic: CriticState,
    x: np.ndarray,
    input_gain: np.ndarray,
    clamp: float | None = None,
    counters: dict | None = None,
) -> np.ndarray:
    """Greedy action under the learned S_hat; zero (counted) on Z underflow."""
    try:
        _, g = v_and_grad(critic.approx, x)
    except ZUnderflowError:
        if counters is not None:
            counters["act_underflows"] = counters.get("act_underflows", 0) + 1
        return np.zeros(input_gain.shape[1])
    u = policy_action(actor.s_hat, input_gain, g)
    if clamp is not None:
        u = np.clip(u, -clamp, clamp)
    return u


def actor_step(
    actor: ActorState,
    critic: CriticState,
    x: np.ndarray,
    x_next: np.ndarray,
    q: float,
    input_gain: np.ndarray,
    dt: float,
    *,
    v_k: float,
    grad_v: np.ndarray,
) -> ActorTD:
    """One full actor iteration given V and grad V at x from a shared query."""
    td = _actor_td_with_grad(actor, critic, v_k, grad_v, x_next, q, input_gain, dt)
    update_s(actor, critic, td, x, input_gain, dt, grad_v=grad_v)
    return td
