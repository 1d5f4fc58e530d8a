"""Benchmark domain definitions: drifts, costs, and the merge helpers."""

import math

import numpy as np
import pytest

from paclmdp.domains import (
    CarFollowingParams,
    car_following_accel,
    make_car_on_hill,
    make_domain,
    make_merge,
    make_pendulum,
    merge_state_cost,
    merge_success,
)


def test_hill_drift_values():
    hill = make_car_on_hill()
    assert np.allclose(hill.dynamics.drift(np.array([0.0, 2.0])), [2.0, 0.0])
    got = hill.dynamics.drift(np.array([0.7, -1.2]))
    s = 0.5 * 0.7 * math.exp(-0.49)
    want = [-1.2 / math.sqrt(1.0 + s), -9.8 * s / math.sqrt(1.0 + s * s)]
    assert np.allclose(got, want, rtol=0.0, atol=1e-15)


def test_hill_slope_vanishes_far_out():
    hill = make_car_on_hill()
    d = hill.dynamics.drift(np.array([6.0, 1.0]))
    assert abs(d[1]) < 1e-12
    assert d[0] == pytest.approx(1.0, abs=1e-6)


def test_hill_cost_modes():
    offset = make_car_on_hill(cost_mode="offset")
    # Penalty pockets at (1, -1) and (-1, 1); the far flats are free.
    assert offset.cost(np.array([1.0, -1.0])) == pytest.approx(4.0 + 4.0 * math.exp(-6.0))
    assert offset.cost(np.array([-1.0, 1.0])) == pytest.approx(4.0 + 4.0 * math.exp(-6.0))
    assert offset.cost(np.array([8.0, 0.0])) == pytest.approx(0.0, abs=1e-9)
    # The raw formula is negative everywhere, so clamp mode degenerates to 0.
    clamp = make_car_on_hill(cost_mode="clamp")
    assert clamp.cost(np.array([1.0, -1.0])) == 0.0
    assert clamp.cost(np.array([8.0, 0.0])) == 0.0
    assert clamp.counters.clamps == 2


def test_pendulum_drift_and_cost():
    pend = make_pendulum(cost_mode="offset")
    assert np.allclose(pend.dynamics.drift(np.array([0.5, 2.0])), [2.0, math.sin(0.5)])
    assert pend.cost(np.array([0.0, 3.0])) == pytest.approx(4.0, abs=1e-9)
    assert pend.cost(np.array([2.0, -3.0])) == pytest.approx(4.0, abs=1e-9)
    assert pend.cost(np.array([0.0, 0.0])) == pytest.approx(8.0 * math.exp(-9.0))
    assert pend.dynamics.noise[1] == 2.0


def test_domain_shapes():
    for name, dims in (("car_on_hill", 2), ("pendulum", 2), ("merge", 4)):
        prob = make_domain(name)
        assert prob.dynamics.dim == dims
        assert prob.dynamics.action_dim == 1
        assert prob.init_region.shape == (dims, 2)
        assert prob.name == name


def test_make_domain_rejects_unknown():
    with pytest.raises(ValueError):
        make_domain("cartpole")
    with pytest.raises(ValueError):
        make_car_on_hill(cost_mode="shift")


def test_car_following_branches():
    assert car_following_accel(-20.0, 2.0) == pytest.approx(-0.22601386465061624, abs=1e-15)
    assert car_following_accel(-20.0, -2.0) == pytest.approx(0.8708696510621146, abs=1e-15)


def test_car_following_clamps():
    assert car_following_accel(-0.5, -8.0) == 8.0
    assert car_following_accel(-200.0, 10.0) == -8.0


def test_car_following_requires_rear_car_behind():
    with pytest.raises(ValueError):
        car_following_accel(0.0, 1.0)
    with pytest.raises(ValueError):
        car_following_accel(3.0, 1.0)


def test_car_following_custom_params():
    params = CarFollowingParams(approach=(1.0, 1.0, 1.0), brake=(1.0, 1.0, 1.0),
                                v2=10.0, accel_limit=100.0)
    assert car_following_accel(-5.0, -2.0, params) == pytest.approx(10.0 * 2.0 / 5.0)


def test_merge_cost_midgap_is_zero():
    assert merge_state_cost(np.array([-20.0, 0.0, -40.0, 0.0])) == 0.0


def test_merge_cost_branches():
    # Outside the gap the velocity term is dropped and the scale is 10.
    ahead = merge_state_cost(np.array([10.0, 5.0, -40.0, 0.0]))
    assert ahead == pytest.approx(10.0 - 10.0 * math.exp(-10.0 * 1.5**2))
    inside = merge_state_cost(np.array([-10.0, 1.0, -40.0, 0.0]))
    assert inside == pytest.approx(1.0 - math.exp(-10.0 * 0.25 - 10.0))
    assert merge_state_cost(np.array([-1.0, 0.0, 0.0, 0.0])) == 10.0


def test_merge_cost_gap_boundary_is_out():
    # The between condition is strict on both sides.
    at_rear = merge_state_cost(np.array([-40.0, 0.0, -40.0, 0.0]))
    assert at_rear == pytest.approx(10.0 - 10.0 * math.exp(-10.0))
    at_lead = merge_state_cost(np.array([0.0, 0.0, -40.0, 0.0]))
    assert at_lead == pytest.approx(10.0 - 10.0 * math.exp(-10.0))


def test_merge_cost_nonnegative_on_box():
    prob = make_merge()
    rng = np.random.default_rng(2)
    for _ in range(500):
        x = prob.sample_init(rng)
        assert prob.cost(x) >= 0.0
    assert prob.counters.clamps == 0


def test_merge_dynamics_layout():
    prob = make_merge()
    dyn = prob.dynamics
    assert dyn.dt == 0.1
    assert np.array_equal(dyn.input_gain.ravel(), [0.05, 1.0, 0.0, 0.0])
    assert np.array_equal(dyn.noise, [0.0, 2.5, 0.0, 2.5])
    x = np.array([-20.0, 1.5, -40.0, -2.0])
    a0 = car_following_accel(-40.0, -2.0)
    want = [1.5, 0.0, -2.0 + 0.5 * a0 * 0.1, a0]
    assert np.allclose(dyn.drift(x), want, rtol=0.0, atol=1e-15)


def test_merge_drift_guards_overrun():
    # The simulator keeps rolling even if the rear car passes the lead car.
    prob = make_merge()
    d = prob.dynamics.drift(np.array([-20.0, 0.0, 1.0, 2.0]))
    assert np.all(np.isfinite(d))
    assert d[3] == car_following_accel(-0.1, 2.0)


def test_merge_success_cases():
    assert merge_success(np.array([-20.0, 0.0, -40.0, 0.0]))
    assert not merge_success(np.array([10.0, 0.0, -40.0, 0.0]))
    assert not merge_success(np.array([-50.0, 0.0, -40.0, 0.0]))
    assert not merge_success(np.array([-40.0, 0.0, -40.0, 0.0]))
    assert not merge_success(np.array([0.0, 0.0, -40.0, 0.0]))
