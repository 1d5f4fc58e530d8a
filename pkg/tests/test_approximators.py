"""Tests for the Z approximators: RBF grid, MLP, tabular, and snapshots."""

import numpy as np
import pytest

from paclmdp.approximators import (
    MlpZApproximator,
    TabularZApproximator,
    ZUnderflowError,
    build_rbf_grid,
    load_snapshot,
    save_snapshot,
    v_and_grad,
)
from paclmdp.approximators.mlp import n_mlp_params


def test_rbf_grid_layout_and_mass():
    approx = build_rbf_grid([[-1.0, 1.0], [0.0, 4.0]], (3, 5), total_mass=2.0)
    assert approx.centers.shape == (15, 2)
    assert approx.dim == 2
    assert approx.n_params == 15
    # Row-major mesh: first axis varies slowest.
    assert np.allclose(approx.centers[0], [-1.0, 0.0])
    assert np.allclose(approx.centers[4], [-1.0, 4.0])
    assert np.allclose(approx.centers[5], [0.0, 0.0])
    assert approx.weights.sum() == pytest.approx(2.0)
    # Bandwidth 0.7 x spacing per dimension: spacings 1.0 and 1.0.
    assert np.allclose(approx.inv_bw2, 1.0 / 0.7**2)


def test_rbf_grid_validation():
    with pytest.raises(ValueError):
        build_rbf_grid([[0.0, 1.0]], (1,))
    with pytest.raises(ValueError):
        build_rbf_grid([[1.0, 0.0]], (3,))
    with pytest.raises(ValueError):
        build_rbf_grid([[0.0, 1.0], [0.0, 1.0]], (3,))
    with pytest.raises(ValueError):
        build_rbf_grid([[0.0, 1.0]], (3,), total_mass=0.0)


def test_rbf_model_integrates_to_total_mass():
    # Normalized bases mean the quadrature of the model recovers sum(weights).
    approx = build_rbf_grid([[-2.0, 2.0]], (5,), total_mass=1.5)
    rng = np.random.default_rng(0)
    approx.weights[:] = rng.uniform(0.1, 0.5, 5)
    approx.weights *= 1.5 / approx.weights.sum()
    xs = np.linspace(-30.0, 30.0, 20001)
    vals = np.array([approx.value(np.array([x])) for x in xs])
    integral = float((0.5 * (vals[1:] + vals[:-1]) * np.diff(xs)).sum())
    assert integral == pytest.approx(1.5, rel=1e-6)


def test_rbf_query_param_gradient_is_features():
    approx = build_rbf_grid([[-1.0, 1.0], [-1.0, 1.0]], (3, 3))
    x = np.array([0.2, -0.4])
    q = approx.query(x, need_input_grad=True)
    # Value is linear in the weights, so the parameter gradient is the
    # feature vector itself.
    assert q.value == pytest.approx(float(approx.weights @ q.grad_params))
    eps = 1e-7
    i = 4
    approx.weights[i] += eps
    assert (approx.value(x) - q.value) / eps == pytest.approx(
        q.grad_params[i], rel=1e-5
    )


def test_rbf_clone_is_independent():
    approx = build_rbf_grid([[-1.0, 1.0]], (4,))
    other = approx.clone()
    other.weights[0] = 99.0
    assert approx.weights[0] != 99.0


def test_mlp_create_shapes_and_init():
    rng = np.random.default_rng(1)
    approx = MlpZApproximator.create(
        [[-1.0, 1.0], [0.0, 2.0]], hidden=(8,), out_act="softplus", rng=rng
    )
    assert approx.layer_sizes == (2, 8, 1)
    assert approx.n_params == n_mlp_params((2, 8, 1)) == 33
    # Biases start at zero; weights stay within the fan-in bound.
    assert np.all(approx.params[16:24] == 0.0)
    assert np.all(approx.params[32:] == 0.0)
    assert np.all(np.abs(approx.params[:16]) <= 1.0 / np.sqrt(2.0))
    assert np.all(np.abs(approx.params[24:32]) <= 1.0 / np.sqrt(8.0))


def test_mlp_normalization_maps_box_to_unit():
    approx = MlpZApproximator.create([[-4.0, 4.0], [2.0, 6.0]], hidden=(4,))
    assert np.allclose(approx.normalize(np.array([-4.0, 2.0])), [0.0, 0.0])
    assert np.allclose(approx.normalize(np.array([4.0, 6.0])), [1.0, 1.0])
    z = np.array([0.25, 0.75])
    assert np.allclose(approx.normalize(approx.denormalize(z)), z)


def test_mlp_bad_configuration():
    with pytest.raises(ValueError):
        MlpZApproximator.create([[-1.0, 1.0]], hidden=(4,), out_act="relu")
    with pytest.raises(ValueError):
        MlpZApproximator((2, 4, 1), "tanh", np.zeros(5), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        MlpZApproximator.create([[1.0, 1.0]], hidden=(4,))


def test_mlp_output_bounds():
    rng = np.random.default_rng(2)
    box = [[-1.0, 1.0], [-1.0, 1.0]]
    tanh_net = MlpZApproximator.create(box, hidden=(16, 16), out_act="tanh", rng=rng)
    soft_net = MlpZApproximator.create(box, hidden=(16, 16), out_act="softplus", rng=rng)
    for _ in range(200):
        x = rng.uniform(-3.0, 3.0, 2)
        zt = tanh_net.value(x)
        zs = soft_net.value(x)
        assert np.exp(-1.0) <= zt <= np.exp(1.0)
        assert 0.0 < zs <= 1.0


def test_mlp_input_gradient_includes_normalization():
    rng = np.random.default_rng(3)
    approx = MlpZApproximator.create([[-4.0, 4.0], [0.0, 2.0]], hidden=(8,), rng=rng)
    x = np.array([1.3, 0.7])
    q = approx.query(x, need_input_grad=True)
    eps = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = eps
        fd = (approx.value(x + e) - approx.value(x - e)) / (2 * eps)
        assert q.grad_input[d] == pytest.approx(fd, rel=1e-4, abs=1e-10)


def test_mlp_param_gradient_finite_difference():
    rng = np.random.default_rng(4)
    approx = MlpZApproximator.create([[-1.0, 1.0]], hidden=(6,), rng=rng)
    x = np.array([0.3])
    q = approx.query(x)
    eps = 1e-6
    for i in [0, 3, 6, 8, 12]:
        approx.params[i] += eps
        up = approx.value(x)
        approx.params[i] -= 2 * eps
        dn = approx.value(x)
        approx.params[i] += eps
        assert q.grad_params[i] == pytest.approx((up - dn) / (2 * eps), rel=1e-4, abs=1e-10)


def test_v_and_grad_is_negative_log():
    approx = build_rbf_grid([[-1.0, 1.0]], (5,), total_mass=2.0)
    x = np.array([0.1])
    v, g = v_and_grad(approx, x)
    assert v == pytest.approx(-np.log(approx.value(x)))
    eps = 1e-6
    fd = (
        -np.log(approx.value(x + eps)) + np.log(approx.value(x - eps))
    ) / (2 * eps)
    assert g[0] == pytest.approx(fd, rel=1e-5)


def test_v_and_grad_underflow():
    approx = TabularZApproximator(np.array([[0.0]]), np.array([1e-300]))
    with pytest.raises(ZUnderflowError):
        v_and_grad(approx, np.array([0.0]))


def test_tabular_snaps_to_nearest_state():
    approx = TabularZApproximator.uniform(np.array([0.0, 1.0, 2.0]), total_mass=3.0)
    assert approx.states.shape == (3, 1)
    assert approx.value(np.array([0.4])) == 1.0
    assert approx.state_index(np.array([1.6])) == 2
    q = approx.query(np.array([0.9]), need_input_grad=True)
    assert np.array_equal(q.grad_params, [0.0, 1.0, 0.0])
    assert np.array_equal(q.grad_input, [0.0])


def test_tabular_uniform_validation():
    with pytest.raises(ValueError):
        TabularZApproximator.uniform(np.array([0.0, 1.0]), total_mass=-1.0)


def test_snapshot_round_trip_rbf(tmp_path):
    approx = build_rbf_grid([[-1.0, 1.0], [0.0, 2.0]], (3, 4), total_mass=1.7)
    rng = np.random.default_rng(5)
    approx.weights[:] = rng.uniform(0.0, 1.0, 12)
    extras = {"z_avg": 0.8317283, "s_hat": [[6.25]], "iteration": 12345}
    path = tmp_path / "snap_rbf.txt"
    save_snapshot(approx, path, extras)
    loaded, got_extras = load_snapshot(path)
    assert np.array_equal(loaded.weights, approx.weights)
    assert got_extras["z_avg"] == 0.8317283
    assert got_extras["s_hat"] == [[6.25]]
    assert got_extras["iteration"] == 12345
    x = np.array([0.31, 1.47])
    assert loaded.value(x) == approx.value(x)


def test_snapshot_round_trip_mlp(tmp_path):
    rng = np.random.default_rng(6)
    approx = MlpZApproximator.create(
        [[-2.0, 2.0], [-1.0, 1.0]], hidden=(5, 3), out_act="tanh", rng=rng
    )
    path = tmp_path / "snap_mlp.txt"
    save_snapshot(approx, path)
    loaded, extras = load_snapshot(path)
    assert extras == {}
    assert loaded.layer_sizes == approx.layer_sizes
    assert loaded.out_act == "tanh"
    assert np.array_equal(loaded.params, approx.params)
    x = np.array([0.7, -0.2])
    assert loaded.value(x) == approx.value(x)


def test_snapshot_round_trip_tabular(tmp_path):
    approx = TabularZApproximator(
        np.array([[0.0, 0.0], [1.0, 0.5]]), np.array([0.25, 0.75])
    )
    path = tmp_path / "snap_tab.txt"
    save_snapshot(approx, path)
    loaded, _ = load_snapshot(path)
    assert np.array_equal(loaded.states, approx.states)
    assert np.array_equal(loaded.values, approx.values)


def test_snapshot_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.txt"
    path.write_text('{"format": "something-else"}\n1.0\n')
    with pytest.raises(ValueError):
        load_snapshot(path)


def test_snapshot_rejects_truncated_params(tmp_path):
    approx = build_rbf_grid([[-1.0, 1.0]], (4,))
    path = tmp_path / "snap.txt"
    save_snapshot(approx, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_snapshot(path)


def test_snapshot_rejects_unknown_kind(tmp_path):
    path = tmp_path / "snap.txt"
    path.write_text(
        '{"format": "paclmdp-snapshot-1", "kind": "spline", "extras": {}}\n0.5\n'
    )
    with pytest.raises(ValueError):
        load_snapshot(path)
