import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlsysid.activation import evaluate, leaky_relu, linear, relu
from nlsysid.learner import (LearnerConfig, RegressionDataset, build_dataset, decode,
                             empirical_scaling, empirical_scaling_traj, encode, grad_single, loss,
                             loss_single, normalized_error, normalized_loss, sgd_indices, sgd_steps,
                             sgd_train)
from nlsysid.simulator import SystemParams, Trajectory, gaussian_inputs, random_system, simulate
from nlsysid.verify import check_rate_bound, finite_diff_grad, random_single_row_problem

ACTS = [linear(), leaky_relu(0.25), leaky_relu(0.5), relu()]


def one_sample(x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return RegressionDataset(x, y, 1.0, y.shape[1], x.shape[1] - y.shape[1])


@pytest.fixture
def system(rng):
    params = random_system(3, 4, 0.6, rng, leaky_relu(0.5))
    return params, simulate(params, gaussian_inputs(4, 61, rng))


def test_dataset_bookkeeping(rng):
    params = random_system(2, 3, 0.5, rng, relu())
    ds = build_dataset(simulate(params, gaussian_inputs(3, 11, rng)), 1.0)
    assert len(ds) == 10 and ds.X.shape == (10, 5) and ds.Y.shape == (10, 2)
    zero = build_dataset(simulate(params, np.zeros((11, 3))), 1.0)
    assert not np.any(zero.X)
    with pytest.raises(ValueError):
        build_dataset(simulate(params, np.zeros((1, 3))), 1.0)
    with pytest.raises(ValueError):
        build_dataset(simulate(params, np.zeros((5, 3))), 0.0)


def test_zero_state_rows_carry_inputs(rng):
    params = SystemParams(np.zeros((2, 2)), np.zeros((2, 3)), relu())
    U = gaussian_inputs(3, 11, rng)
    ds = build_dataset(simulate(params, U), 1.0)
    np.testing.assert_array_equal(ds.X[:, 2:], U[1:11])
    assert not np.any(ds.X[:, :2])


@pytest.mark.parametrize("mu", [0.3, 1.0, 2.5])
def test_reparameterization_is_exact(system, mu):
    params, traj = system
    ds = build_dataset(traj, mu)
    C = encode(params.A, params.B, mu)
    np.testing.assert_allclose(evaluate(params.act, ds.X @ C.T), ds.Y, rtol=0, atol=1e-13)
    assert loss(C, ds, params.act) < 1e-26
    assert normalized_loss(C, ds, params.act) < 1e-26


def test_loss_and_gradient_by_hand():
    ds = one_sample([1.0], [1.0])
    assert loss(np.zeros((1, 1)), ds, linear()) == 0.5
    np.testing.assert_array_equal(grad_single(np.zeros((1, 1)), [1.0], [1.0], linear()), [[-1.0]])


def test_sgd_two_steps_by_hand():
    ds = one_sample([1.0], [1.0])
    theta = np.zeros((1, 1))
    sgd_steps(theta, ds, [0], 0.5, linear())
    assert theta[0, 0] == 0.5
    sgd_steps(theta, ds, [0], 0.5, linear())
    assert theta[0, 0] == 0.75
    tr = sgd_train(ds, LearnerConfig(eta=0.5, iterations=2, mu_mode=1.0, trace_stride=1), linear())
    assert tr.theta[0, 0] == 0.75
    assert tr.losses.tolist() == [1.0, 0.25, 0.0625]


def test_zero_step_leaves_theta(system):
    params, traj = system
    ds = build_dataset(traj, 1.0)
    theta0 = np.random.default_rng(0).standard_normal((3, 7))
    tr = sgd_train(ds, LearnerConfig(eta=0.0, iterations=500, theta0=theta0), params.act)
    np.testing.assert_array_equal(tr.theta, theta0)


def test_kernel_matches_numpy_update(system):
    params, traj = system
    ds = build_dataset(traj, 0.7)
    rng = np.random.default_rng(1)
    theta = rng.standard_normal((3, 7))
    ref = theta.copy()
    idx = rng.integers(0, len(ds), 200)
    for j in idx:
        ref -= 0.01 * grad_single(ref, ds.X[j], ds.Y[j], params.act)
    sgd_steps(theta, ds, idx, 0.01, params.act)
    np.testing.assert_allclose(theta, ref, rtol=0, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(0, 3))
def test_gradient_matches_finite_differences(seed, k):
    act = ACTS[k]
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((3, 5))
    x = rng.standard_normal(5)
    y = rng.standard_normal(3)
    z = theta @ x
    if np.min(np.abs(z)) < 1e-3 * np.linalg.norm(x):
        return
    g = grad_single(theta, x, y, act)
    fd = finite_diff_grad(theta, x, y, act)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-12) + 1e-9


def test_truth_is_stationary(system):
    params, traj = system
    ds = build_dataset(traj, 0.9)
    C = encode(params.A, params.B, 0.9)
    for j in range(len(ds)):
        assert np.max(np.abs(grad_single(C, ds.X[j], ds.Y[j], params.act))) < 1e-12


def test_decode_examples():
    A, B = decode([[2.0, 3.0]], 0.5, 1)
    np.testing.assert_array_equal(A, [[1.0]])
    np.testing.assert_array_equal(B, [[3.0]])
    theta = np.arange(12.0).reshape(2, 6)
    np.testing.assert_array_equal(decode(theta, 1.0)[0], theta[:, :2])
    with pytest.raises(ValueError):
        decode(theta, 0.0)


@given(seed=st.integers(0, 2**32 - 1), mu=st.sampled_from([0.125, 0.5, 1.0, 2.0, 4.0]))
def test_decode_inverts_encode(seed, mu):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 2))
    A2, B2 = decode(encode(A, B, mu), mu)
    np.testing.assert_array_equal(A2, A)
    np.testing.assert_array_equal(B2, B)


def test_normalized_metrics():
    C = np.array([[1.0, -2.0], [0.5, 3.0]])
    assert normalized_error(C, C) == 0.0
    assert normalized_error(np.zeros_like(C), C) == 1.0
    assert normalized_error(2 * C, C) == 1.0
    with pytest.raises(ValueError):
        normalized_error(C, np.zeros_like(C))
    ds = one_sample([1.0], [2.0])
    assert normalized_loss(np.array([[1.0]]), ds, linear()) == 0.25
    assert normalized_loss(np.zeros((1, 1)), ds, relu()) == 1.0
    with pytest.raises(ValueError):
        normalized_loss(np.zeros((1, 1)), one_sample([1.0], [0.0]), linear())


def test_empirical_scaling_examples():
    rng = np.random.default_rng(4)
    u = rng.standard_normal((200_000, 3))
    h = 2.0 * rng.standard_normal((200_000, 2))
    assert empirical_scaling(h, u) == pytest.approx(0.5, rel=0.02)
    assert empirical_scaling(rng.standard_normal((200_000, 3)), u) == pytest.approx(1.0, rel=0.02)
    with pytest.raises(ValueError):
        empirical_scaling(np.zeros((10, 2)), u[:10])


@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.01, 100))
def test_empirical_scaling_homogeneous(seed, s):
    rng = np.random.default_rng(seed)
    h, u = rng.standard_normal((50, 3)), rng.standard_normal((50, 2))
    assert empirical_scaling(s * h, u) == pytest.approx(empirical_scaling(h, u) / s, rel=1e-10)


def test_empirical_scaling_on_trajectory(system):
    _, traj = system
    N = len(traj) - 1
    assert empirical_scaling_traj(traj) == empirical_scaling(traj.states[1:N + 1], traj.inputs[1:N + 1])


def test_rows_are_separable_bitwise(system):
    params, traj = system
    ds = build_dataset(traj, 0.8)
    idx = sgd_indices(5, len(ds), 3000)
    full = sgd_train(ds, LearnerConfig(eta=0.02, iterations=3000), params.act, indices=idx).theta
    for i in range(ds.n):
        row = RegressionDataset(ds.X, np.ascontiguousarray(ds.Y[:, i:i + 1]), ds.mu, 1, ds.X.shape[1] - 1)
        single = sgd_train(row, LearnerConfig(eta=0.02, iterations=3000), params.act, indices=idx).theta
        np.testing.assert_array_equal(single[0], full[i])


def test_training_is_deterministic(system):
    params, traj = system
    ds = build_dataset(traj, 1.0)
    cfg = LearnerConfig(eta=0.02, iterations=2000, seed=9, trace_stride=50)
    C = encode(params.A, params.B, 1.0)
    a, b = sgd_train(ds, cfg, params.act, C), sgd_train(ds, cfg, params.act, C)
    np.testing.assert_array_equal(a.theta, b.theta)
    np.testing.assert_array_equal(a.errors, b.errors)
    np.testing.assert_array_equal(a.losses, b.losses)


def test_trace_layout(system, tmp_path):
    params, traj = system
    ds = build_dataset(traj, 1.0)
    tr = sgd_train(ds, LearnerConfig(eta=0.01, iterations=1050, trace_stride=100), params.act)
    assert tr.iterations.tolist() == list(range(0, 1001, 100))
    assert np.all(np.isnan(tr.errors))
    ref = sgd_train(ds, LearnerConfig(eta=0.01, iterations=1050, trace_stride=1050), params.act)
    np.testing.assert_array_equal(tr.theta, ref.theta)
    tr.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "iteration,normalized_error,normalized_loss"
    w = json.loads(tr.weights_json())
    assert np.array(w["A_hat"]).shape == (3, 3) and np.array(w["B_hat"]).shape == (3, 4)


def test_scaling_consistency():
    rng = np.random.default_rng(11)
    params = random_system(2, 3, 0.5, rng, leaky_relu(0.5))
    traj = simulate(params, gaussian_inputs(3, 80, rng))
    estimates = []
    for mu in (1.0, 0.5, 2.0):
        ds = build_dataset(traj, mu)
        eta = 0.5 / np.max(np.sum(ds.X**2, axis=1))
        tr = sgd_train(ds, LearnerConfig(eta=eta, iterations=200_000, trace_stride=200_000), params.act)
        estimates.append(tr.decoded)
    for A_hat, B_hat in estimates[1:]:
        np.testing.assert_allclose(A_hat, estimates[0][0], atol=1e-6)
        np.testing.assert_allclose(B_hat, estimates[0][1], atol=1e-6)
    np.testing.assert_allclose(estimates[0][0], params.A, atol=1e-6)


def test_expected_contraction():
    prob = random_single_row_problem(10, 200, leaky_relu(0.5), 21)
    rep = check_rate_bound(prob, 200, 22)
    assert np.all(np.asarray(rep.observed) <= 1.1 * np.asarray(rep.bound))


def test_single_point_contraction_by_hand():
    # N=1, x=[1]: gamma_+ = gamma_- = B = 1 so eta = 1 and one step lands on the truth
    from nlsysid.verify import SingleRowProblem
    prob = SingleRowProblem(np.array([[1.0]]), np.array([2.0]), linear())
    rep = check_rate_bound(prob, 5, 0, checkpoints=(1, 2))
    assert rep.detail["eta"] == 1.0 and rep.detail["factor"] == 0.0
    assert np.all(np.asarray(rep.observed) == 0.0) and rep.passed
    rep = check_rate_bound(prob, 5, 0, theta0=np.array([2.0]))
    assert np.all(np.asarray(rep.observed) == 0.0)
