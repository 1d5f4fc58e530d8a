"""Tests for the critic TD update, z_avg tracking, and weight projection."""

import math

import numpy as np
import pytest

from paclmdp.approximators.mlp import MlpZApproximator
from paclmdp.approximators.rbf import build_rbf_grid
from paclmdp.approximators.tabular import TabularZApproximator
from paclmdp.core import PassiveSample
from paclmdp.critic import (
    Z_FLOOR,
    CriticState,
    ProjectionError,
    critic_step,
    critic_td,
    td_error,
    update_params_nn,
    update_z_avg,
)


def make_tabular_critic(alpha1=0.1, alpha2=0.1, z_avg=1.0, total_mass=1.0):
    approx = TabularZApproximator.uniform(np.array([[0.0], [1.0]]), total_mass)
    return CriticState(approx, alpha1, alpha2, z_avg=z_avg, total_mass=total_mass)


def test_td_error_frozen_value():
    critic = make_tabular_critic(z_avg=0.9)
    td = td_error(critic, 1.0, 1.0, 0.1)
    assert td.e == 0.9 - math.exp(-0.1)
    assert td.e == -0.004837418035959495
    assert td.z_k == 1.0
    assert td.z_next == 1.0


def test_td_target_clamped_at_one():
    critic = make_tabular_critic(z_avg=0.9)
    td = td_error(critic, 0.5, 2.0, 0.0)
    assert td.e == 0.9 * 0.5 - 1.0
    # exactly at the boundary the clamp has no effect
    td = td_error(critic, 0.5, 1.0, 0.0)
    assert td.e == 0.9 * 0.5 - 1.0


def test_td_uses_exponentiated_cost():
    critic = make_tabular_critic(z_avg=1.0)
    td = td_error(critic, 0.3, 0.6, 2.0)
    assert td.e == pytest.approx(0.3 - math.exp(-2.0) * 0.6, abs=1e-15)


def test_critic_td_reads_approximator():
    critic = make_tabular_critic(z_avg=0.8)
    # uniform tabular over two states: Z = 0.5 everywhere
    sample = PassiveSample(np.array([0.0]), np.array([1.0]), 0.1)
    td = critic_td(critic, sample)
    assert td.z_k == 0.5
    assert td.z_next == 0.5
    assert td.e == 0.8 * 0.5 - math.exp(-0.1) * 0.5


def test_update_z_avg_frozen_value():
    critic = make_tabular_critic(alpha1=0.1, z_avg=0.9)
    td = td_error(critic, 1.0, 1.0, 0.1)
    update_z_avg(critic, td)
    assert critic.z_avg == 0.9009674836071919


def test_update_z_avg_clamps_to_unit_interval():
    critic = make_tabular_critic(alpha1=10.0, z_avg=0.9)
    td = td_error(critic, 1.0, 1.0, 5.0)  # large positive e pushes z_avg down
    assert td.e > 0.0
    update_z_avg(critic, td)
    assert critic.z_avg == Z_FLOOR

    critic = make_tabular_critic(alpha1=10.0, z_avg=0.9)
    td = td_error(critic, 1.0, 1.0, 0.0)  # e = -0.1 pushes z_avg up past 1
    assert td.e < 0.0
    update_z_avg(critic, td)
    assert critic.z_avg == 1.0


def test_rate_decays_harmonically():
    critic = make_tabular_critic()
    critic.decay_tau = 100.0
    critic.iteration = 300
    assert critic.rate(2.0) == pytest.approx(0.5, abs=1e-15)
    critic.decay_tau = None
    assert critic.rate(2.0) == 2.0


def test_v_avg_is_negative_log():
    critic = make_tabular_critic(z_avg=0.5)
    assert critic.v_avg == -math.log(0.5)


def test_clone_is_independent():
    critic = make_tabular_critic(z_avg=0.7)
    critic.iteration = 42
    other = critic.clone()
    other.approx.params[:] = 9.0
    other.z_avg = 0.1
    other.iteration = 0
    assert critic.z_avg == 0.7
    assert critic.iteration == 42
    assert np.all(critic.approx.params == 0.5)


def test_nn_update_matches_manual_step():
    rng = np.random.default_rng(3)
    approx = MlpZApproximator.create(
        np.array([[-1.0, 1.0], [-1.0, 1.0]]), hidden=(4,), rng=rng
    )
    approx.params[:] = rng.normal(0.0, 0.3, approx.params.size)
    critic = CriticState(approx, 0.05, 0.2, z_avg=0.8)
    x = np.array([0.3, -0.4])
    x_next = np.array([0.1, 0.2])
    q0 = approx.query(x)
    z_next = approx.value(x_next)
    before = approx.params.copy()

    td = update_params_nn(critic, PassiveSample(x, x_next, 0.3))

    expected_e = 0.8 * q0.value - math.exp(-0.3) * z_next
    assert td.e == pytest.approx(expected_e, abs=1e-15)
    step = 2.0 * 0.2 * td.e * 0.8
    assert np.allclose(approx.params, before - step * q0.grad_params, atol=1e-15)


def test_critic_step_uses_pre_update_values():
    rng = np.random.default_rng(5)
    approx = MlpZApproximator.create(
        np.array([[-1.0, 1.0], [-1.0, 1.0]]), hidden=(4,), rng=rng
    )
    approx.params[:] = rng.normal(0.0, 0.3, approx.params.size)
    # decay with iteration != 0 catches an update that increments too early
    critic = CriticState(approx, 0.3, 0.2, z_avg=0.8, decay_tau=1.0, iteration=5)
    x = np.array([0.2, 0.1])
    x_next = np.array([-0.3, 0.4])
    q0 = approx.query(x)
    z_next = approx.value(x_next)
    before = approx.params.copy()

    td = critic_step(critic, x, x_next, 0.1)

    e = 0.8 * q0.value - math.exp(-0.1) * z_next
    assert td.e == pytest.approx(e, abs=1e-15)
    rate = 1.0 / (1.0 + 5.0)  # both updates see iteration 5
    step = 2.0 * (0.2 * rate) * e * 0.8
    assert np.allclose(approx.params, before - step * q0.grad_params, atol=1e-15)
    assert critic.z_avg == pytest.approx(
        0.8 - 2.0 * (0.3 * rate) * e * q0.value, abs=1e-15
    )
    assert critic.iteration == 6


def test_rbf_update_keeps_weights_on_constraint_set():
    approx = build_rbf_grid(np.array([[-1.0, 1.0], [-1.0, 1.0]]), [5, 5])
    critic = CriticState(approx, 0.5, 0.5, total_mass=1.0)
    rng = np.random.default_rng(11)
    x = np.zeros(2)
    for _ in range(200):
        x_next = np.clip(x + rng.normal(0.0, 0.3, 2), -1.0, 1.0)
        q = float(x @ x)
        cap = 1.0 / critic.z_avg
        critic_step(critic, x, x_next, q)
        w = approx.params
        assert np.all(w >= -1e-12)
        assert abs(w.sum() - 1.0) <= 1e-9
        # cap enforced with the z_avg the projection actually used
        assert approx.value(x) <= cap + 1e-9 * max(1.0, cap)
        x = x_next
    assert critic.iteration == 200


def test_infeasible_cap_raises_projection_error():
    # one state, indicator feature: any weight vector has Z = total mass,
    # so a cap below the mass cannot be met
    approx = TabularZApproximator.uniform(np.array([[0.0]]), 5.0)
    critic = CriticState(approx, 0.1, 0.1, z_avg=1.0, total_mass=5.0)
    with pytest.raises(ProjectionError) as err:
        critic_step(critic, np.array([0.0]), np.array([0.0]), 0.1)
    assert "cap=" in str(err.value)


def test_tabular_chain_converges_to_eigenpair():
    # two-state chain: the fixed point of the update is the principal
    # eigenpair of diag(exp(-q)) P, with z_avg matching the eigenvalue
    P = np.array([[0.7, 0.3], [0.4, 0.6]])
    qv = np.array([0.0, 0.2])
    M = np.diag(np.exp(-qv)) @ P
    vals, vecs = np.linalg.eig(M)
    i = int(np.argmax(vals.real))
    lam = float(vals.real[i])
    zstar = vecs[:, i].real
    zstar = zstar / zstar.sum()

    approx = TabularZApproximator.uniform(np.array([[0.0], [1.0]]), 1.0)
    critic = CriticState(approx, 1.0, 0.5, decay_tau=2000.0)
    rng = np.random.default_rng(7)
    for _ in range(30000):
        k = int(rng.integers(2))
        kn = int(rng.choice(2, p=P[k]))
        critic_step(
            critic, np.array([float(k)]), np.array([float(kn)]), float(qv[k])
        )
    assert abs(critic.z_avg - lam) / lam <= 0.02
    assert np.max(np.abs(approx.params - zstar) / zstar) <= 0.05
