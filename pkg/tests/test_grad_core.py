import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabgns.errors import ConfigError, NumericError, ShapeError
from tabgns.grad_core import (
    DenseLayer,
    OptimizerState,
    adam_step,
    clip_global_norm,
    finite_difference_check,
    he_uniform_layer,
    linear_backward,
    linear_forward,
    relu_backward,
    relu_forward,
    sgd_step,
)


def layer(w, b):
    return DenseLayer(np.array(w, dtype=float), np.array(b, dtype=float))


# ---------------------------------------------------------------- forward


def test_linear_forward_selects_column():
    out = linear_forward([1, 0], layer([[2, 3], [5, 7]], [0, 0]))
    np.testing.assert_array_equal(out, [2, 5])


def test_linear_forward_zero_input_gives_bias():
    rng = np.random.default_rng(0)
    out = linear_forward([0, 0], layer(rng.normal(size=(2, 2)), [1, -1]))
    np.testing.assert_array_equal(out, [1, -1])


def test_linear_forward_hand_value():
    assert linear_forward([1, 1], layer([[0.5, 0.5]], [0.25]))[0] == 1.25


def test_linear_forward_batch_matches_rows():
    rng = np.random.default_rng(1)
    lay = he_uniform_layer(rng, 4, 3)
    X = rng.normal(size=(5, 4))
    batch = linear_forward(X, lay)
    for r in range(5):
        np.testing.assert_allclose(batch[r], linear_forward(X[r], lay), rtol=0, atol=1e-14)


def test_linear_forward_shape_error_names_dims():
    with pytest.raises(ShapeError, match="3 columns"):
        linear_forward([1, 2], layer(np.zeros((2, 3)), [0, 0]))


@pytest.mark.parametrize("z, want", [([-1, 0, 2], [0, 0, 2]), ([0, 0, 0], [0, 0, 0]), ([3.5, -3.5], [3.5, 0])])
def test_relu_forward(z, want):
    np.testing.assert_array_equal(relu_forward(z), want)


# ---------------------------------------------------------------- layers


def test_dense_layer_rejects_mismatched_bias():
    with pytest.raises(ShapeError):
        layer(np.zeros((2, 3)), [0, 0, 0])


def test_dense_layer_rejects_nonfinite():
    with pytest.raises(NumericError):
        layer([[np.nan]], [0])


def test_he_uniform_bounds():
    lay = he_uniform_layer(np.random.default_rng(0), 6, 1000)
    assert np.abs(lay.weight).max() <= 1.0  # sqrt(6/6)
    assert np.all(lay.bias == 0)


# ---------------------------------------------------------------- backward


def test_linear_backward_hand_example():
    dW, db, dx = linear_backward([1], [2, 3], layer([[4, 5]], [0]))
    np.testing.assert_array_equal(dW, [[2, 3]])
    np.testing.assert_array_equal(db, [1])
    np.testing.assert_array_equal(dx, [4, 5])


def test_linear_backward_zero_upstream():
    dW, db, dx = linear_backward([0, 0], [1.5, -2, 3], layer(np.ones((2, 3)), [0, 0]))
    assert not dW.any() and not db.any() and not dx.any()


def test_linear_backward_ones_gives_column_sums():
    rng = np.random.default_rng(2)
    lay = he_uniform_layer(rng, 5, 3)
    _, _, dx = linear_backward(np.ones(3), rng.normal(size=5), lay)
    np.testing.assert_array_equal(dx, lay.weight.sum(axis=0))


def test_linear_backward_shape_mismatch():
    with pytest.raises(ShapeError):
        linear_backward([1, 2, 3], [1, 2], layer(np.ones((2, 2)), [0, 0]))


def test_relu_backward_definition():
    np.testing.assert_array_equal(relu_backward([1, 1], [2, -2]), [1, 0])
    np.testing.assert_array_equal(relu_backward([5], [0]), [0])


def _fd_linear_relu(rng, n_in, n_out, batch):
    lay = he_uniform_layer(rng, n_in, n_out)
    lay.bias = rng.normal(size=n_out)
    X = rng.normal(size=(batch, n_in))
    C = rng.normal(size=(batch, n_out))  # random projection makes the sum-loss generic

    def loss(p):
        z = X @ p["W"].T + p["b"]
        return float(np.sum(C * np.maximum(z, 0.0)))

    z = linear_forward(X, lay)
    d_z = relu_backward(C, z)
    dW, db, _ = linear_backward(d_z, X, lay)
    return loss, {"W": lay.weight, "b": lay.bias}, {"W": dW, "b": db}, z


def test_linear_relu_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_in, n_out = rng.integers(1, 9, size=2)
        loss, params, grads, z = _fd_linear_relu(rng, n_in, n_out, 4)
        if np.min(np.abs(z)) < 1e-3:  # kink too close for central differences
            continue
        worst = max(worst, finite_difference_check(loss, params, grads, epsilon=1e-6))
    assert worst <= 1e-5


def test_linear_dx_matches_finite_differences():
    rng = np.random.default_rng(4)
    lay = he_uniform_layer(rng, 5, 3)
    x = rng.normal(size=5)
    c = rng.normal(size=3)
    _, _, dx = linear_backward(c, x, lay)
    err = finite_difference_check(lambda p: float(c @ linear_forward(p["x"], lay)), {"x": x}, {"x": dx})
    assert err <= 1e-8


# ---------------------------------------------------------------- optimizers


def test_adam_zero_gradient_leaves_params():
    params = {"w": np.array([1.0, -2.0])}
    state = OptimizerState.for_params(params, 0.001)
    state.m["w"][:] = [0.5, 0.5]
    state.v["w"][:] = [0.25, 0.25]
    new, st2 = adam_step(params, {"w": np.zeros(2)}, state)
    assert st2.step == 1
    np.testing.assert_array_less(np.abs(st2.m["w"]), np.abs(state.m["w"]))
    np.testing.assert_array_less(st2.v["w"], state.v["w"])
    # zero gradient with decayed moments still moves; with zero moments it does not
    fresh = OptimizerState.for_params(params, 0.001)
    new, _ = adam_step(params, {"w": np.zeros(2)}, fresh)
    np.testing.assert_array_equal(new["w"], params["w"])


def test_adam_first_step_moves_by_lr():
    params = {"p": np.array(0.3)}
    new, state = adam_step(params, {"p": np.array(1.0)}, OptimizerState.for_params(params, 0.001))
    # bias-corrected first step is lr * g / (|g| + eps)
    assert new["p"] == pytest.approx(0.3 - 0.001 / (1 + 1e-8), abs=1e-15)
    assert state.step == 1


def test_adam_deterministic_and_pure():
    rng = np.random.default_rng(5)
    params = {"a": rng.normal(size=(3, 2)), "b": rng.normal(size=2)}
    grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
    state = OptimizerState.for_params(params, 0.01)
    before = {k: v.copy() for k, v in params.items()}
    p1, s1 = adam_step(params, grads, state)
    p2, s2 = adam_step(params, grads, state)
    for k in params:
        assert p1[k].tobytes() == p2[k].tobytes()
        assert s1.v[k].tobytes() == s2.v[k].tobytes()
        np.testing.assert_array_equal(params[k], before[k])
    assert state.step == 0


def test_adam_step_counter_increments():
    params = {"w": np.ones(2)}
    state = OptimizerState.for_params(params, 0.1)
    for i in range(1, 4):
        params, state = adam_step(params, {"w": np.ones(2)}, state)
        assert state.step == i


def test_adam_rejects_nonfinite_gradient_with_block_name():
    params = {"W0": np.ones(2), "gates": np.ones(2)}
    state = OptimizerState.for_params(params, 0.1)
    with pytest.raises(NumericError, match="gates"):
        adam_step(params, {"W0": np.ones(2), "gates": np.array([1.0, np.inf])}, state)


def test_adam_rejects_shape_mismatch():
    params = {"w": np.ones(2)}
    state = OptimizerState.for_params(params, 0.1)
    with pytest.raises(ShapeError):
        adam_step(params, {"w": np.ones(3)}, state)
    with pytest.raises(ShapeError):
        adam_step(params, {"v": np.ones(2)}, state)


def test_learning_rate_must_be_positive():
    with pytest.raises(ConfigError):
        OptimizerState.for_params({"w": np.ones(1)}, 0.0)


def test_sgd_step():
    new, state = sgd_step({"w": np.array([1.0])}, {"w": np.array([2.0])},
                          OptimizerState.for_params({"w": np.ones(1)}, 0.1))
    assert new["w"][0] == pytest.approx(0.8)
    assert state.step == 1


def test_clip_global_norm():
    grads = {"a": np.array([3.0]), "b": np.array([4.0])}
    same, clipped = clip_global_norm(grads, 10.0)
    assert not clipped and same is grads
    out, clipped = clip_global_norm(grads, 1.0)
    assert clipped
    assert np.sqrt(out["a"] ** 2 + out["b"] ** 2)[0] == pytest.approx(1.0)


# ---------------------------------------------------------------- FD oracle


def test_fd_check_quadratic():
    err = finite_difference_check(lambda p: 0.5 * float(p["p"][0] ** 2), {"p": np.array([3.0])},
                                  {"p": np.array([3.0])}, epsilon=1e-4)
    assert err < 1e-8


def test_fd_check_constant_loss():
    assert finite_difference_check(lambda p: 4.0, {"p": np.zeros(3)}, {"p": np.zeros(3)}) == 0.0


def test_fd_check_detects_wrong_gradient():
    err = finite_difference_check(lambda p: float(np.sum(p["p"] ** 2)), {"p": np.array([1.0, 2.0])},
                                  {"p": np.array([2.0, 0.0])})
    assert err > 0.5


@pytest.mark.parametrize("eps", [0.0, -1e-6])
def test_fd_check_rejects_bad_epsilon(eps):
    with pytest.raises(ConfigError):
        finite_difference_check(lambda p: 0.0, {"p": np.zeros(1)}, {"p": np.zeros(1)}, epsilon=eps)


def test_fd_check_does_not_mutate_params():
    p = {"p": np.array([1.0, 2.0])}
    finite_difference_check(lambda q: float(np.sum(q["p"])), p, {"p": np.ones(2)})
    np.testing.assert_array_equal(p["p"], [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_linear_backward_property(n_in, n_out, batch, seed):
    rng = np.random.default_rng(seed)
    lay = he_uniform_layer(rng, n_in, n_out)
    X = rng.normal(size=(batch, n_in))
    C = rng.normal(size=(batch, n_out))
    dW, db, dX = linear_backward(C, X, lay)
    np.testing.assert_allclose(dW, C.T @ X, atol=1e-12)
    np.testing.assert_allclose(db, C.sum(axis=0), atol=1e-12)
    err = finite_difference_check(lambda p: float(np.sum(C * (p["X"] @ p["W"].T))),
                                  {"W": lay.weight, "X": X}, {"W": dW, "X": dX})
    assert err <= 1e-5
