"""Benchmark domains: car-on-a-hill, pendulum swing-up, and highway merge.

Each constructor returns an :class:`~paclmdp.core.LMDPProblem`.  State costs
support two sign repairs selected by ``cost_mode``: ``"clamp"`` evaluates the
raw formula and relies on clamping at zero, ``"offset"`` shifts the formula by
its analytic infimum so it is nonnegative as written.  The merge cost is
nonnegative either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DynamicsModel, LMDPProblem

# Merge state layout: relative position/velocity of the ego car (1) to the
# lead car (2), then of the rear car (0) to the lead car.
DX12, DV12, DX02, DV02 = 0, 1, 2, 3

_COST_MODES = ("clamp", "offset")


@dataclass(frozen=True)
class CarFollowingParams:
    """Rear-car model: accel branch when closing speed is negative, brake
    branch otherwise, each (alpha, beta, gamma); lead speed v2 in m/s."""

    approach: tuple = (1.55, 1.08, 1.65)
    brake: tuple = (2.15, -1.65, -0.89)
    v2: float = 30.0
    accel_limit: float = 8.0


DEFAULT_CAR_FOLLOWING = CarFollowingParams()


def car_following_accel(
    dx02: float, dv02: float, params: CarFollowingParams = DEFAULT_CAR_FOLLOWING
) -> float:
    """Acceleration of the rear car toward the lead car.

    a0 = alpha * v2^beta * (-dv02) / (-dx02)^gamma, with the branch chosen by
    the sign of dv02 and the result clamped to +-accel_limit.  Requires
    dx02 < 0 (the rear car strictly behind the lead car).
    """
    if dx02 >= 0.0:
        raise ValueError(f"rear car is not behind the lead car (dx02={dx02})")
    alpha, beta, gamma = params.approach if dv02 < 0.0 else params.brake
    a0 = alpha * params.v2**beta * (-dv02) / (-dx02) ** gamma
    return max(-params.accel_limit, min(params.accel_limit, a0))


def _check_cost_mode(cost_mode: str) -> None:
    if cost_mode not in _COST_MODES:
        raise ValueError(f"cost_mode must be one of {_COST_MODES}")


def make_car_on_hill(cost_mode: str = "clamp") -> LMDPProblem:
    """Car on a hill: position/velocity state, force input on velocity."""
    _check_cost_mode(cost_mode)
    offset = 8.0 if cost_mode == "offset" else 0.0

    def drift(x):
        xp, xv = x
        s = 0.5 * xp * math.exp(-xp * xp)
        return np.array([xv / math.sqrt(1.0 + s), -9.8 * s / math.sqrt(1.0 + s * s)])

    def cost(x):
        xp, xv = x
        peaks = math.exp(-0.5 * (xp - 1.0) ** 2 - (xv + 1.0) ** 2) + math.exp(
            -0.5 * (xp + 1.0) ** 2 - (xv - 1.0) ** 2
        )
        return 4.0 * (peaks - 2.0) + offset

    dyn = DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), 0.01)
    region = np.array([[-2.0 * math.pi, 2.0 * math.pi], [-math.pi, math.pi]])
    return LMDPProblem(dyn, cost, region, name="car_on_hill")


def make_pendulum(cost_mode: str = "clamp") -> LMDPProblem:
    """Pendulum swing-up: angle/angular-velocity state, torque input."""
    _check_cost_mode(cost_mode)
    offset = 8.0 if cost_mode == "offset" else 0.0

    def drift(x):
        return np.array([x[1], math.sin(x[0])])

    def cost(x):
        xv = x[1]
        return 4.0 * (math.exp(-((xv - 3.0) ** 2)) + math.exp(-((xv + 3.0) ** 2)) - 2.0) + offset

    dyn = DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array([0.0, 2.0]), 0.01)
    region = np.array([[-2.0 * math.pi, 2.0 * math.pi], [-math.pi, math.pi]])
    return LMDPProblem(dyn, cost, region, name="pendulum")


def merge_state_cost(x: np.ndarray) -> float:
    """Gap-tracking cost: near zero when the ego car sits mid-gap matching the
    rear car's speed, and an order of magnitude larger outside the gap."""
    dx12, dv12, dx02, dv02 = x[DX12], x[DV12], x[DX02], x[DV02]
    in_gap = dx02 < dx12 < 0.0
    k1, k2, k3 = (1.0, 10.0, 10.0) if in_gap else (10.0, 10.0, 0.0)
    if dx02 == 0.0:
        return k1
    dv10 = dv12 - dv02
    return k1 - k1 * math.exp(-k2 * (1.0 - 2.0 * dx12 / dx02) ** 2 - k3 * dv10 * dv10)


def make_merge(
    cost_mode: str = "clamp", car_following: CarFollowingParams = DEFAULT_CAR_FOLLOWING
) -> LMDPProblem:
    """Highway merge: ego car slots between a lead car and a following car.

    State [dx12, dv12, dx02, dv02]; the ego acceleration is the input, the
    rear car follows the lead car per ``car_following``.
    """
    _check_cost_mode(cost_mode)
    dt = 0.1

    def drift(x):
        # Guard the gap so rollouts that let the rear car overrun stay finite;
        # the public car_following_accel rejects dx02 >= 0 outright.
        gap = min(x[DX02], -0.1)
        a0 = car_following_accel(gap, x[DV02], car_following)
        return np.array([x[DV12], 0.0, x[DV02] + 0.5 * a0 * dt, a0])

    gain = np.array([[0.5 * dt], [1.0], [0.0], [0.0]])
    dyn = DynamicsModel(drift, gain, np.array([0.0, 2.5, 0.0, 2.5]), dt)
    region = np.array([[-100.0, 100.0], [-10.0, 10.0], [-100.0, -5.0], [-10.0, 10.0]])
    return LMDPProblem(dyn, merge_state_cost, region, name="merge")


def merge_success(x: np.ndarray) -> bool:
    """The ego car sits strictly between the rear car and the lead car."""
    return bool(x[DX02] < x[DX12] < 0.0)


DOMAINS = {
    "car_on_hill": make_car_on_hill,
    "pendulum": make_pendulum,
    "merge": make_merge,
}


def make_domain(name: str, cost_mode: str = "clamp") -> LMDPProblem:
    try:
        builder = DOMAINS[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; choose from {sorted(DOMAINS)}") from None
    return builder(cost_mode=cost_mode)
