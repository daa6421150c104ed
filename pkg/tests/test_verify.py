import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlsysid.activation import leaky_relu, linear, relu
from nlsysid.learner import grad_single
from nlsysid.simulator import SystemParams, gaussian_inputs, random_system, simulate, truncated_state
from nlsysid.verify import (check_independence_structure, check_lipschitz_input, check_merge,
                            check_norm_growth, check_rate_bound, check_truncation,
                            dependence_window, finite_diff_grad, random_single_row_problem,
                            reports_json)


def test_finite_differences_exact_for_quadratic(rng):
    theta, x, y = rng.standard_normal((3, 4)), rng.standard_normal(4), rng.standard_normal(3)
    np.testing.assert_allclose(finite_diff_grad(theta, x, y, linear()),
                               grad_single(theta, x, y, linear()), atol=1e-9)
    with pytest.raises(ValueError):
        finite_diff_grad(theta, x, y, linear(), step=0.0)


def test_finite_differences_leaky(rng):
    theta, x, y = rng.standard_normal((3, 4)), rng.standard_normal(4), rng.standard_normal(3)
    g = grad_single(theta, x, y, leaky_relu(0.5))
    fd = finite_diff_grad(theta, x, y, leaky_relu(0.5))
    assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_truncation_check_random_systems(rng):
    for _ in range(20):
        params = random_system(4, 3, float(rng.uniform(0, 0.95)), rng, leaky_relu(0.5))
        U = gaussian_inputs(3, 25, rng)
        for L in range(1, 11):
            assert check_truncation(params, U, L).passed


def test_truncation_memoryless_is_exact(rng):
    params = SystemParams(np.zeros((3, 3)), rng.standard_normal((3, 2)), relu())
    rep = check_truncation(params, gaussian_inputs(2, 10, rng), 1)
    assert rep.observed == 0.0


def test_lipschitz_check(rng):
    params = random_system(4, 3, 0.8, rng, leaky_relu(0.3))
    U = gaussian_inputs(3, 20, rng)
    assert check_lipschitz_input(params, U, 5, np.zeros(3)).observed <= 0.0
    for _ in range(100):
        assert check_lipschitz_input(params, U, int(rng.integers(0, 20)), rng.standard_normal(3)).passed


def test_lipschitz_memoryless_linear(rng):
    B = rng.standard_normal((3, 2))
    params = SystemParams(np.zeros((3, 3)), B, linear())
    U = gaussian_inputs(2, 8, rng)
    delta = rng.standard_normal(2)
    base = simulate(params, U)
    U2 = U.copy()
    U2[3] += delta
    pert = simulate(params, U2)
    np.testing.assert_allclose(pert.states[4] - base.states[4], B @ delta, atol=1e-14)
    np.testing.assert_array_equal(np.delete(pert.states, 4, 0), np.delete(base.states, 4, 0))
    assert check_lipschitz_input(params, U, 3, delta).passed


def test_dependence_windows():
    for i in range(1, 6):
        lo, hi = dependence_window(i, 2, 1)
        assert lo == hi  # L=2 gives a single input per sample
    assert dependence_window(3, 4, 2) == (7, 9)


@given(L=st.integers(2, 6), tau_frac=st.floats(0, 1), i=st.integers(1, 6))
def test_windows_skip_offset_class(L, tau_frac, i):
    tau = 1 + int(tau_frac * (L - 1))
    lo, hi = dependence_window(i, L, tau)
    assert all((s - tau) % L != 0 for s in range(lo, hi + 1))
    assert hi - lo == L - 2


def test_offset_inputs_do_not_move_truncated_states(rng):
    params = random_system(3, 2, 0.7, rng, leaky_relu(0.5))
    L, tau, T = 3, 2, 20
    U = gaussian_inputs(2, T, rng)
    V = U.copy()
    V[tau::L] = rng.standard_normal(V[tau::L].shape)
    for t in range(tau, T, L):
        np.testing.assert_array_equal(truncated_state(params, U, t, L - 1), truncated_state(params, V, t, L - 1))


def test_independence_check(rng):
    params = random_system(4, 3, 0.6, rng, leaky_relu(0.25))
    rep = check_independence_structure(params, 3, 2, 50, rng)
    assert rep.passed and rep.observed == 0
    with pytest.raises(ValueError):
        check_independence_structure(params, 1, 1, 1, rng)


def test_rate_bound_check():
    rep = check_rate_bound(random_single_row_problem(10, 200, leaky_relu(0.5), 3), 200, 4)
    assert rep.passed and rep.samples_used == 200
    prob = random_single_row_problem(5, 50, leaky_relu(0.5), 5)
    rep = check_rate_bound(prob, 10, 6, theta0=prob.theta)
    assert np.all(np.asarray(rep.observed) == 0.0)
    assert not check_rate_bound(random_single_row_problem(5, 50, relu(), 1), 10, 0).passed


def test_norm_growth_and_merge(rng):
    params = random_system(3, 3, 0.8, rng, leaky_relu(0.5))
    assert check_norm_growth(params, 5, 20_000, 1).passed
    assert check_merge(params, gaussian_inputs(3, 300, rng), 4).passed


def test_reports_serialize(rng):
    params = random_system(2, 2, 0.5, rng, relu())
    reps = [check_truncation(params, gaussian_inputs(2, 5, rng), 2),
            check_rate_bound(random_single_row_problem(3, 20, leaky_relu(0.5), 0), 5, 0)]
    data = json.loads(reports_json(reps))
    assert [d["name"] for d in data] == ["truncation", "rate_bound"]
    assert isinstance(data[1]["observed"], list)
