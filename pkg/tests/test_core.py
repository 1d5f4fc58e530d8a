"""Dynamics stepping, cost plumbing, and the control-cost matrix."""

import math

import numpy as np
import pytest

from paclmdp.core import (
    ControlObservabilityError,
    DynamicsModel,
    LMDPProblem,
    PassiveSample,
    SampleSet,
    control_cost,
    policy_action,
    step_controlled,
    step_passive,
    total_cost,
    true_control_cost_matrix,
)


def double_integrator(dt=0.1, noise=(0.0, 1.0)):
    def drift(x):
        return np.array([x[1], 0.0])

    return DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array(noise), dt)


def test_dynamics_shape_validation():
    drift = lambda x: x
    with pytest.raises(ValueError):
        DynamicsModel(drift, np.array([0.0, 1.0]), np.array([1.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array([1.0]), 0.1)
    with pytest.raises(ValueError):
        DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array([1.0, -1.0]), 0.1)
    with pytest.raises(ValueError):
        DynamicsModel(drift, np.array([[0.0], [1.0]]), np.array([1.0, 1.0]), 0.0)


def test_dynamics_dims():
    dyn = double_integrator()
    assert dyn.dim == 2
    assert dyn.action_dim == 1


def test_step_passive_deterministic_when_noiseless():
    dyn = double_integrator(dt=0.5, noise=(0.0, 0.0))
    rng = np.random.default_rng(0)
    x = np.array([1.0, 2.0])
    assert np.array_equal(step_passive(dyn, x, rng), np.array([2.0, 2.0]))


def test_step_passive_draws_one_normal_per_dimension():
    # Zeroing one noise entry must not shift the draws used by the others.
    x = np.array([0.0, 0.0])
    full = double_integrator(noise=(1.0, 1.0))
    partial = double_integrator(noise=(0.0, 1.0))
    a = step_passive(full, x, np.random.default_rng(7))
    b = step_passive(partial, x, np.random.default_rng(7))
    assert b[0] == 0.0
    assert a[1] == b[1]


def test_step_passive_scales_noise_with_sqrt_dt():
    dyn = double_integrator(dt=0.25, noise=(0.0, 2.0))
    x = np.zeros(2)
    w = np.random.default_rng(3).standard_normal(2)
    got = step_passive(dyn, x, np.random.default_rng(3))
    assert got[1] == pytest.approx(2.0 * 0.5 * w[1], abs=0.0)


def test_step_passive_rejects_bad_drift():
    bad_shape = DynamicsModel(lambda x: np.zeros(3), np.array([[1.0], [0.0]]),
                              np.array([1.0, 1.0]), 0.1)
    with pytest.raises(ValueError):
        step_passive(bad_shape, np.zeros(2), np.random.default_rng(0))
    blows_up = DynamicsModel(lambda x: np.array([np.inf, 0.0]), np.array([[1.0], [0.0]]),
                             np.array([1.0, 1.0]), 0.1)
    with pytest.raises(FloatingPointError):
        step_passive(blows_up, np.zeros(2), np.random.default_rng(0))


def test_step_controlled_adds_gain_times_u_dt():
    dyn = double_integrator(dt=0.1, noise=(0.0, 1.0))
    x = np.array([0.5, -0.5])
    u = np.array([2.0])
    passive = step_passive(dyn, x, np.random.default_rng(11))
    controlled = step_controlled(dyn, x, u, np.random.default_rng(11))
    assert np.array_equal(controlled - passive, np.array([0.0, 0.2]))


def test_lmdp_problem_validates_region():
    dyn = double_integrator()
    with pytest.raises(ValueError):
        LMDPProblem(dyn, lambda x: 0.0, np.array([[0.0, 1.0]]))
    with pytest.raises(ValueError):
        LMDPProblem(dyn, lambda x: 0.0, np.array([[0.0, 1.0], [2.0, 1.0]]))


def test_cost_clamps_negative_and_counts():
    dyn = double_integrator()
    prob = LMDPProblem(dyn, lambda x: float(x[0]), np.array([[-1.0, 1.0], [-1.0, 1.0]]))
    assert prob.cost(np.array([0.5, 0.0])) == 0.5
    assert prob.cost(np.array([-0.5, 0.0])) == 0.0
    assert prob.cost(np.array([-2.0, 0.0])) == 0.0
    assert prob.counters.clamps == 2


def test_cost_rejects_non_finite():
    dyn = double_integrator()
    prob = LMDPProblem(dyn, lambda x: float("nan"), np.array([[-1.0, 1.0], [-1.0, 1.0]]))
    with pytest.raises(ValueError):
        prob.cost(np.zeros(2))


def test_sample_init_stays_in_region():
    dyn = double_integrator()
    region = np.array([[-2.0, -1.0], [3.0, 4.0]])
    prob = LMDPProblem(dyn, lambda x: 0.0, region)
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = prob.sample_init(rng)
        assert region[0, 0] <= x[0] <= region[0, 1]
        assert region[1, 0] <= x[1] <= region[1, 1]


def test_control_cost_matrix_basic():
    s = true_control_cost_matrix(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    assert np.allclose(s, [[1.0]])
    s = true_control_cost_matrix(np.array([[0.0], [1.0]]), np.array([0.0, 2.0]))
    assert np.allclose(s, [[4.0]])


def test_control_cost_matrix_skips_noiseless_rows():
    # A gain entry on a noiseless dimension contributes nothing.
    gain = np.array([[0.005], [1.0], [0.0], [0.0]])
    s = true_control_cost_matrix(gain, np.array([0.0, 2.5, 0.0, 2.5]))
    assert np.allclose(s, [[6.25]])


def test_control_cost_matrix_failure_modes():
    with pytest.raises(ControlObservabilityError):
        true_control_cost_matrix(np.array([[1.0], [1.0]]), np.array([0.0, 0.0]))
    with pytest.raises(ControlObservabilityError):
        true_control_cost_matrix(np.array([[1.0], [0.0]]), np.array([0.0, 1.0]))


def test_control_cost_matrix_multi_input():
    gain = np.array([[1.0, 0.0], [0.0, 2.0]])
    s = true_control_cost_matrix(gain, np.array([1.0, 1.0]))
    assert np.allclose(s, [[1.0, 0.0], [0.0, 0.25]])


def test_control_cost_value():
    assert control_cost(np.array([1.0]), np.array([[6.25]]), 0.1) == pytest.approx(0.008)
    assert control_cost(np.array([0.0]), np.array([[6.25]]), 0.1) == 0.0


def test_total_cost_sums_state_and_control():
    dyn = double_integrator(dt=0.1)
    prob = LMDPProblem(dyn, lambda x: 3.0, np.array([[-1.0, 1.0], [-1.0, 1.0]]))
    got = total_cost(prob, np.zeros(2), np.array([1.0]), np.array([[1.0]]))
    assert got == pytest.approx(3.0 * 0.1 + 0.5 * 1.0 * 0.1)


def test_policy_action_example():
    u = policy_action(np.array([[1.0]]), np.array([[0.0], [1.0]]), np.array([0.0, 0.2]))
    assert np.allclose(u, [-0.2])


def test_policy_action_uses_s_and_gain():
    s = np.array([[2.0, 0.0], [0.0, 1.0]])
    gain = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    g = np.array([1.0, -1.0, 2.0])
    assert np.allclose(policy_action(s, gain, g), [-4.0, 0.0])


def test_passive_sample_rejects_negative_cost():
    with pytest.raises(ValueError):
        PassiveSample(np.zeros(2), np.zeros(2), -0.1)


def test_sample_set_indexing_and_concat():
    a = SampleSet(np.zeros((3, 2)), np.ones((3, 2)), np.arange(3.0))
    b = SampleSet(np.ones((2, 2)), np.zeros((2, 2)), np.ones(2))
    assert len(a) == 3
    assert a.dim == 2
    s = a[1]
    assert isinstance(s, PassiveSample)
    assert s.q == 1.0
    both = SampleSet.concatenate([a, b])
    assert len(both) == 5
    assert [round(p.q, 1) for p in both] == [0.0, 1.0, 2.0, 1.0, 1.0]


def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        SampleSet(np.zeros((3, 2)), np.zeros((3, 2)), np.array([0.0, -1.0, 0.0]))
