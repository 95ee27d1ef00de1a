import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from sslfuse import tensor as T
from sslfuse.optim import AdamState, adam_step
from sslfuse.tensor import NumericError, ShapeError, Tensor

from oracles import central_difference, rel_err


def leaf(a):
    return Tensor(np.array(a, dtype=np.float64), requires_grad=True)


def grad_check(build, *leaves, tol=1e-6):
    """Compare backward() against central differences for every leaf."""
    for x in leaves:
        x.zero_grad()
    build().backward()
    for x in leaves:
        num = central_difference(lambda: float(build().data), x.data)
        assert rel_err(num, x.grad) < tol


# -- matmul ---------------------------------------------------------------------
def test_matmul_identity():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(T.matmul(a, Tensor(np.eye(2))).data, a.data)


def test_matmul_hand_value():
    assert T.matmul(Tensor([[1.0, 0.0]]), Tensor([[2.0], [5.0]])).data.tolist() == [[2.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradient_finite_difference():
    rng = np.random.default_rng(0)
    a, b = leaf(rng.standard_normal((3, 4))), leaf(rng.standard_normal((4, 2)))
    w = rng.standard_normal((3, 2))
    grad_check(lambda: T.tsum(T.matmul(a, b) * w), a, b)


# -- softmax --------------------------------------------------------------------
def test_softmax_examples():
    assert np.allclose(T.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
    big = T.softmax(Tensor([1000.0, 0.0])).data
    assert np.all(np.isfinite(big)) and big[0] == 1.0 and big[1] < 1e-300
    got = T.softmax(Tensor(np.log([1.0, 2.0, 3.0]))).data
    assert np.allclose(got, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)


def test_softmax_nan_raises():
    with pytest.raises(NumericError):
        T.softmax(Tensor([0.0, np.nan]))


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=1, max_dims=3, max_side=6),
                  elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one(x):
    s = T.softmax(Tensor(x), axis=-1).data
    assert np.all(s >= 0)
    assert np.allclose(s.sum(axis=-1), 1.0, atol=1e-9)


def test_softmax_and_log_softmax_gradients():
    rng = np.random.default_rng(1)
    x = leaf(rng.standard_normal((3, 5)))
    w = rng.standard_normal((3, 5))
    grad_check(lambda: T.tsum(T.softmax(x, axis=-1) * w), x)
    grad_check(lambda: T.tsum(T.log_softmax(x, axis=-1) * w), x)


# -- layer norm -----------------------------------------------------------------
def test_layer_norm_examples():
    ones, zeros = Tensor(np.ones(4)), Tensor(np.zeros(4))
    assert np.allclose(T.layer_norm(Tensor(np.full(4, 7.0)), ones, zeros).data, 0.0)
    out = T.layer_norm(Tensor([1.0, 3.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0).data
    assert np.allclose(out, [-1.0, 1.0], atol=1e-15)


def test_layer_norm_statistics():
    rng = np.random.default_rng(2)
    x = Tensor(rng.standard_normal((20, 16)) * 5 + 3)
    y = T.layer_norm(x, Tensor(np.ones(16)), Tensor(np.zeros(16)), eps=0.0).data
    assert np.all(np.abs(y.mean(axis=-1)) < 1e-9)
    assert np.all(np.abs(y.var(axis=-1) - 1) < 1e-6)


def test_layer_norm_gradient():
    rng = np.random.default_rng(3)
    x, g, b = leaf(rng.standard_normal((3, 6))), leaf(rng.standard_normal(6)), leaf(rng.standard_normal(6))
    w = rng.standard_normal((3, 6))
    grad_check(lambda: T.tsum(T.layer_norm(x, g, b) * w), x, g, b)


# -- convolutions ---------------------------------------------------------------
def test_conv_identity_kernel():
    x = np.random.default_rng(4).standard_normal((1, 5, 6))
    assert np.allclose(T.conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1)))).data, x)
    x1 = x[0]
    assert np.allclose(T.conv1d(Tensor(x1[:1]), Tensor(np.ones((1, 1, 1)))).data, x1[:1])


def test_conv_length_formula():
    assert T.conv_output_length(10, 3, 2, 1) == 5
    out = T.conv1d(Tensor(np.ones((1, 10))), Tensor(np.ones((1, 1, 3))), stride=2, padding=1)
    assert out.shape == (1, 5)
    with pytest.raises(ShapeError):
        T.conv_output_length(2, 5, 1, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 5), st.integers(1, 3), st.integers(0, 2))
def test_conv_length_brute_force(n, k, s, p):
    # count window start positions directly
    starts = [i for i in range(0, n + 2 * p) if i + k <= n + 2 * p and i % s == 0]
    if k > n + 2 * p:
        with pytest.raises(ShapeError):
            T.conv_output_length(n, k, s, p)
    else:
        assert T.conv_output_length(n, k, s, p) == len(starts)


def test_conv2d_gradient():
    rng = np.random.default_rng(5)
    x, w, b = leaf(rng.standard_normal((2, 5, 4))), leaf(rng.standard_normal((3, 2, 3, 3))), leaf(rng.standard_normal(3))
    out_shape = T.conv2d(x, w, b, stride=2, padding=1).shape
    r = rng.standard_normal(out_shape)
    grad_check(lambda: T.tsum(T.conv2d(x, w, b, stride=2, padding=1) * r), x, w, b, tol=1e-5)


def test_conv1d_depthwise_gradient():
    rng = np.random.default_rng(6)
    x, w, b = leaf(rng.standard_normal((3, 7))), leaf(rng.standard_normal((3, 1, 3))), leaf(rng.standard_normal(3))
    r = rng.standard_normal((3, 7))
    grad_check(lambda: T.tsum(T.conv1d(x, w, b, padding=1, groups=3) * r), x, w, b, tol=1e-5)


def test_conv1d_matches_direct_sum():
    rng = np.random.default_rng(7)
    x, w = rng.standard_normal((2, 6)), rng.standard_normal((4, 2, 3))
    got = T.conv1d(Tensor(x), Tensor(w), stride=1, padding=0).data
    want = np.array([[sum(w[o, c, j] * x[c, t + j] for c in range(2) for j in range(3))
                      for t in range(4)] for o in range(4)])
    assert np.allclose(got, want, atol=1e-12)


# -- backward -------------------------------------------------------------------
def test_backward_sum_and_square():
    x = leaf([1.0, -2.0, 3.0])
    T.tsum(x).backward()
    assert np.array_equal(x.grad, np.ones(3))
    x.zero_grad()
    T.tsum(x * x).backward()
    assert np.array_equal(x.grad, 2 * x.data)


def test_backward_accumulates_and_rejects_non_scalar():
    x = leaf([1.0, 2.0])
    T.tsum(x).backward()
    T.tsum(x).backward()
    assert np.array_equal(x.grad, [2.0, 2.0])
    with pytest.raises(ValueError):
        (x * 2.0).backward()


def test_elementwise_gradients():
    rng = np.random.default_rng(8)
    a, b = leaf(rng.standard_normal((2, 3))), leaf(rng.uniform(0.5, 2.0, (3,)))
    grad_check(lambda: T.tsum(T.div(T.swish(a), b) + T.sigmoid(a) * b - T.exp(a * 0.3)), a, b)
    grad_check(lambda: T.tsum(T.log(b) * T.tsum(T.glu(T.concat([a, a * 2.0], axis=1)))), a, b)


def test_take_gradient_scatters_repeats():
    x = leaf(np.arange(6.0).reshape(3, 2))
    T.tsum(T.take(x, np.array([2, 2, 0]))).backward()
    assert np.array_equal(x.grad, [[1, 1], [0, 0], [2, 2]])


def test_backward_is_deterministic():
    def run():
        rng = np.random.default_rng(9)
        a, b = leaf(rng.standard_normal((4, 4))), leaf(rng.standard_normal((4, 4)))
        T.tsum(T.softmax(T.matmul(a, b)) * a).backward()
        return a.grad.tobytes() + b.grad.tobytes()
    assert run() == run()


# -- adam -----------------------------------------------------------------------
def test_adam_zero_gradient_leaves_params():
    p = leaf([1.0, 2.0])
    adam_step([p], [np.zeros(2)], AdamState(), lr=0.1)
    assert np.array_equal(p.data, [1.0, 2.0])


def test_adam_single_step_value():
    # hand recurrence: m=0.1, v=0.001, m_hat=1, v_hat=1 -> step = lr
    p = leaf([0.0])
    adam_step([p], [np.ones(1)], AdamState(), lr=0.1, betas=(0.9, 0.999), eps=1e-8)
    assert p.data[0] == pytest.approx(-0.1, abs=1e-8)


def test_adam_deterministic():
    def run():
        rng = np.random.default_rng(10)
        p = leaf(rng.standard_normal(5))
        st_ = AdamState()
        for _ in range(5):
            adam_step([p], [rng.standard_normal(5)], st_, lr=0.01)
        return p.data.tobytes()
    assert run() == run()
