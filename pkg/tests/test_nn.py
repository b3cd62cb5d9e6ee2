import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from dcae_eeg.errors import DegenerateBatch, NonFiniteGradient, OddLength, ShapeMismatch, ToleranceExceeded
from dcae_eeg.nn import (Adam, AdamState, BatchNorm1d, Tensor, adam_step, batchnorm1d, conv1d, dense,
                         dropout, grad_check, mae, maxpool1d, relative_error, upsample_nn)


def naive_conv1d(x, w, b):
    """Triple loop over batch, output channel and position with explicit zero padding."""
    n, cin, length = x.shape
    cout, _, k = w.shape
    pad = (k - 1) // 2
    out = np.zeros((n, cout, length))
    for i in range(n):
        for o in range(cout):
            for t in range(length):
                acc = b[o]
                for c in range(cin):
                    for j in range(k):
                        s = t + j - pad
                        if 0 <= s < length:
                            acc += w[o, c, j] * x[i, c, s]
                out[i, o, t] = acc
    return out


def param(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def weighted_sum(y, rng):
    """Random linear functional of an output so every gradient entry is exercised."""
    return (y * rng.standard_normal(y.shape)).sum()


# -- conv1d -----------------------------------------------------------------------------------

def test_conv_identity_kernel():
    x = Tensor(np.random.default_rng(0).standard_normal((2, 1, 9)))
    y = conv1d(x, Tensor(np.ones((1, 1, 1))), Tensor(np.zeros(1)))
    assert_array_equal(y.data, x.data)


def test_conv_edge_arithmetic():
    y = conv1d(Tensor(np.ones((1, 1, 8))), Tensor(np.ones((1, 1, 3))), Tensor(np.zeros(1)))
    assert_array_equal(y.data[0, 0], [2, 3, 3, 3, 3, 3, 3, 2])


@pytest.mark.parametrize("shape, k", [((2, 3, 10), 3), ((1, 2, 7), 5), ((3, 1, 4), 1)])
def test_conv_matches_loop_oracle(shape, k):
    rng = np.random.default_rng(k)
    x = rng.standard_normal(shape)
    w = rng.standard_normal((4, shape[1], k))
    b = rng.standard_normal(4)
    y = conv1d(Tensor(x), Tensor(w), Tensor(b))
    assert_allclose(y.data, naive_conv1d(x, w, b), rtol=0, atol=1e-6)


def test_conv_shape_errors():
    with pytest.raises(ShapeMismatch):
        conv1d(Tensor(np.zeros((1, 2, 5))), Tensor(np.zeros((1, 3, 3))))
    with pytest.raises(ShapeMismatch):
        conv1d(Tensor(np.zeros((1, 2, 5))), Tensor(np.zeros((1, 2, 4))))


def test_conv_gradient():
    rng = np.random.default_rng(1)
    x, w, b = param(rng, 2, 3, 9), param(rng, 4, 3, 5), param(rng, 4)
    probe = np.random.default_rng(2)
    coef = probe.standard_normal((2, 4, 9))
    rep = grad_check(lambda: (conv1d(x, w, b) * coef).sum(), {"x": x, "w": w, "b": b}, tol=1e-4)
    assert rep.max_rel_error < 1e-4


# -- batch normalization ------------------------------------------------------------------------

def test_batchnorm_train_statistics():
    x = Tensor(np.random.default_rng(3).normal(4.0, 3.0, (8, 3, 50)))
    bn = BatchNorm1d(3, dtype=np.float64)
    y = bn(x).data
    assert_allclose(y.mean(axis=(0, 2)), 0.0, atol=1e-6)
    assert_allclose(y.var(axis=(0, 2)), 1.0, atol=1e-5)
    # running stats moved 10% toward the batch stats
    assert_allclose(bn.running_mean, 0.1 * x.data.mean(axis=(0, 2)), rtol=1e-12)


def test_batchnorm_affine():
    z = np.random.default_rng(4).standard_normal((16, 2, 64))
    z = (z - z.mean(axis=(0, 2), keepdims=True)) / z.std(axis=(0, 2), keepdims=True)
    bn = BatchNorm1d(2, dtype=np.float64)
    bn.gamma.data[:] = 2.0
    bn.beta.data[:] = 3.0
    y = bn(Tensor(z)).data
    assert_allclose(y.mean(axis=(0, 2)), 3.0, atol=1e-9)
    assert_allclose(y.std(axis=(0, 2)), 2.0, atol=1e-4)


def test_batchnorm_eval_uses_running_stats():
    bn = BatchNorm1d(2, dtype=np.float64).eval()
    bn.running_mean[:] = [1.0, -1.0]
    bn.running_var[:] = [4.0, 0.25]
    y = bn(Tensor(np.zeros((1, 2, 3)))).data
    assert_allclose(y[0, :, 0], [-1.0 / np.sqrt(4.0 + 1e-5), 1.0 / np.sqrt(0.25 + 1e-5)])


def test_batchnorm_degenerate():
    with pytest.raises(DegenerateBatch):
        BatchNorm1d(2)(Tensor(np.zeros((1, 2, 1), dtype=np.float32)))


@pytest.mark.parametrize("training", [True, False])
def test_batchnorm_gradient(training):
    rng = np.random.default_rng(5)
    x, g, b = param(rng, 3, 2, 6), param(rng, 2), param(rng, 2)
    rm, rv = np.zeros(2), np.ones(2) * 1.5
    coef = rng.standard_normal((3, 2, 6))

    def loss():
        # fresh copies so the running-stat update does not leak between probes
        return (batchnorm1d(x, g, b, rm.copy(), rv.copy(), training) * coef).sum()

    assert grad_check(loss, {"x": x, "gamma": g, "beta": b}, tol=1e-4).max_rel_error < 1e-4


# -- dropout --------------------------------------------------------------------------------------

def test_dropout_identity_cases():
    x = Tensor(np.arange(10.0))
    assert dropout(x, 0.0, True) is x
    assert dropout(x, 0.7, False) is x


def test_dropout_statistics():
    x = Tensor(np.ones(1_000_000))
    y = dropout(x, 0.2, True, np.random.default_rng(6)).data
    assert abs(np.mean(y > 0) - 0.8) <= 0.002
    assert abs(y.mean() - 1.0) <= 0.005
    assert set(np.unique(y)) == {0.0, 1.25}


def test_dropout_bad_rate():
    with pytest.raises(ValueError):
        dropout(Tensor(np.ones(3)), 1.0, True)


# -- pooling, upsampling, dense -----------------------------------------------------------------------

def test_maxpool_values_and_ties():
    y = maxpool1d(Tensor(np.array([[[1.0, 3.0, 2.0, 4.0]]])))
    assert_array_equal(y.data, [[[3.0, 4.0]]])
    x = Tensor(np.full((1, 1, 6), 2.0), requires_grad=True)
    maxpool1d(x).sum().backward()
    assert_array_equal(x.grad[0, 0], [1, 0, 1, 0, 1, 0])


def test_maxpool_odd():
    with pytest.raises(OddLength):
        maxpool1d(Tensor(np.zeros((1, 1, 5))))


def test_upsample_values_and_inverse():
    y = upsample_nn(Tensor(np.array([[[1.0, 2.0]]])))
    assert_array_equal(y.data, [[[1, 1, 2, 2]]])
    x = np.random.default_rng(7).standard_normal((2, 3, 5))
    assert_array_equal(maxpool1d(upsample_nn(Tensor(x))).data, x)


def test_dense_identity_and_scalar():
    x = np.random.default_rng(8).standard_normal((4, 3))
    assert_array_equal(dense(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x)
    y = dense(Tensor([[2.0]]), Tensor([[3.0]]), Tensor([0.5]))
    assert y.item() == 6.5


def test_dense_shape_error():
    with pytest.raises(ShapeMismatch):
        dense(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


@pytest.mark.parametrize("op", ["maxpool", "upsample", "dense", "mae", "relu"])
def test_layer_gradients(op):
    rng = np.random.default_rng(9)
    x = param(rng, 2, 3, 8)
    params = {"x": x}
    if op == "maxpool":
        fn = lambda: weighted_sum(maxpool1d(x), np.random.default_rng(0))
    elif op == "upsample":
        fn = lambda: weighted_sum(upsample_nn(x), np.random.default_rng(0))
    elif op == "dense":
        w, b = param(rng, 5, 24), param(rng, 5)
        params.update(w=w, b=b)
        fn = lambda: weighted_sum(dense(x.reshape(2, 24), w, b), np.random.default_rng(0))
    elif op == "mae":
        target = Tensor(rng.standard_normal((2, 3, 8)))
        fn = lambda: mae(x, target)
    else:
        fn = lambda: weighted_sum(x.relu(), np.random.default_rng(0))
    # keep random inputs away from the kinks of max, |.| and relu
    x.data[np.abs(x.data) < 0.05] += 0.2
    assert grad_check(fn, params, tol=1e-4, h=1e-5).max_rel_error < 1e-4


def test_dense_only_model_tight():
    rng = np.random.default_rng(10)
    x = Tensor(rng.standard_normal((3, 6)))
    w1, b1, w2, b2 = param(rng, 4, 6), param(rng, 4), param(rng, 2, 4), param(rng, 2)
    coef = rng.standard_normal((3, 2))
    fn = lambda: (dense(dense(x, w1, b1), w2, b2) * coef).sum()
    assert grad_check(fn, {"w1": w1, "b1": b1, "w2": w2, "b2": b2}, tol=1e-7).max_rel_error < 1e-7


def test_grad_check_detects_wrong_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)

    def bad():
        # forward x^2, backward claims 3x
        return Tensor.from_op((x.data ** 2).sum(), (x,), lambda g: (g * 3 * x.data,))

    with pytest.raises(ToleranceExceeded) as err:
        grad_check(bad, {"x": x}, tol=1e-4)
    assert "x" in err.value.args[0]


def test_relative_error_floor():
    assert relative_error([0.0, 1.0], [1e-12, 1.0]) < 1e-5
    assert relative_error([2.0], [1.0]) == pytest.approx(0.5)


# -- autodiff graph ---------------------------------------------------------------------------------

def test_gradient_accumulation_is_additive():
    rng = np.random.default_rng(11)
    x = Tensor(rng.standard_normal(5), requires_grad=True)
    (x * 3.0).sum().backward()
    first = x.grad.copy()
    (x * x).sum().backward()
    assert_allclose(x.grad, first + 2 * x.data)


def test_shared_node_visited_once():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x
    (y + y).sum().backward()
    assert_allclose(x.grad, [8.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_broadcast_gradients(seed):
    rng = np.random.default_rng(seed)
    a = param(rng, 3, 1, 4)
    b = param(rng, 2, 1)
    coef = rng.standard_normal((3, 2, 4))
    fn = lambda: (((a - b) * a / (b * b + 1.0)) * coef).sum()
    assert grad_check(fn, {"a": a, "b": b}, tol=1e-4, h=1e-5).max_rel_error < 1e-4


# -- Adam ---------------------------------------------------------------------------------------------

def test_adam_first_step():
    p = [np.zeros(3)]
    adam_step(p, [np.ones(3)], AdamState(m=[np.zeros(3)], v=[np.zeros(3)]))
    assert_allclose(p[0], -0.001 / (1 + 1e-8), rtol=1e-12)


def test_adam_zero_gradient():
    p = [np.full(2, 5.0)]
    state = AdamState(m=[np.zeros(2)], v=[np.zeros(2)])
    adam_step(p, [np.zeros(2)], state)
    assert_array_equal(p[0], [5.0, 5.0])
    assert state.t == 1


def test_adam_quadratic_descent():
    theta = Tensor(np.array([1.0]), requires_grad=True)
    opt = Adam([theta])
    history = [1.0]
    for _ in range(10):
        opt.zero_grad()
        (theta * theta).sum().backward()
        opt.step()
        history.append(abs(theta.item()))
    assert all(b < a for a, b in zip(history, history[1:]))
    assert all(np.all(v >= 0) for v in opt.state.v)


def test_adam_nonfinite_aborts():
    p = [np.ones(2)]
    state = AdamState(m=[np.zeros(2)], v=[np.zeros(2)])
    with pytest.raises(NonFiniteGradient):
        adam_step(p, [np.array([1.0, np.nan])], state)
    assert_array_equal(p[0], [1.0, 1.0])
    assert state.t == 0


def test_astype_gradient_returns_source_dtype():
    x = Tensor(np.arange(4, dtype=np.float32), requires_grad=True)
    y = x.astype(np.float64)
    assert y.dtype == np.float64
    (y * np.array([1.0, 2.0, 3.0, 4.0])).sum().backward()
    assert x.grad.dtype == np.float32
    assert_array_equal(x.grad, [1.0, 2.0, 3.0, 4.0])
