import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from carryover import tensor as T
from carryover.errors import InvalidRate, NonScalarLoss, ShapeMismatch


def test_matmul_identity_and_hand_product():
    b = T.Tensor([[5.0, 6.0], [7.0, 8.0]])
    np.testing.assert_array_equal(T.matmul(T.Tensor(np.eye(2)), b).data, b.data)
    # 1*5+2*7=19, 1*6+2*8=22, 3*5+4*7=43, 3*6+4*8=50
    np.testing.assert_array_equal(T.matmul(T.Tensor([[1.0, 2.0], [3.0, 4.0]]), b).data, [[19, 22], [43, 50]])


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones((2, 3))))


def test_elementwise_values():
    assert T.sigmoid(T.Tensor(0.0)).item() == 0.5
    assert T.tanh(T.Tensor(0.0)).item() == 0.0
    assert T.sigmoid(T.Tensor(2.0)).item() == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)
    assert T.sigmoid(T.Tensor(2.0)).item() == pytest.approx(0.880797, abs=1e-6)
    np.testing.assert_array_equal(T.relu(T.Tensor([-1.0, 2.0])).data, [0.0, 2.0])


def test_sigmoid_is_stable_at_extremes():
    out = T.sigmoid(T.Tensor([-800.0, 800.0])).data
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [0.0, 1.0])


def test_softmax_values():
    np.testing.assert_allclose(T.softmax(T.Tensor([0.0, 0.0])).data, [0.5, 0.5])
    np.testing.assert_allclose(T.softmax(T.Tensor([1.0, 1.0, 1.0])).data, [1 / 3] * 3)
    e = math.exp(1.0)
    np.testing.assert_allclose(T.softmax(T.Tensor([1.0, 2.0])).data, [1 / (1 + e), e / (1 + e)], atol=1e-12)
    np.testing.assert_allclose(T.softmax(T.Tensor([1.0, 2.0])).data, [0.268941, 0.731059], atol=1e-6)


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-50, 50)))
def test_softmax_sums_to_one(x):
    p = T.softmax(T.Tensor(x)).data
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(p >= 0)
    np.testing.assert_allclose(np.exp(T.log_softmax(T.Tensor(x)).data), p, atol=1e-12)


def test_lstm_cell_zero_weights():
    z = lambda *s: T.Tensor(np.zeros(s))
    h, c = T.lstm_cell_step(z(2), z(1), z(1), z(2, 4), z(1, 4), z(4))
    np.testing.assert_array_equal(h.data, [0.0])
    np.testing.assert_array_equal(c.data, [0.0])
    h, c = T.lstm_cell_step(z(2), z(1), T.Tensor([1.0]), z(2, 4), z(1, 4), z(4))
    # f = 0.5, i*g = 0 -> c = 0.5; h = o * tanh(c) = 0.5 * tanh(0.5)
    np.testing.assert_allclose(c.data, [0.5])
    np.testing.assert_allclose(h.data, [0.5 * math.tanh(0.5)], atol=1e-12)
    assert h.item() == pytest.approx(0.231059, abs=1e-6)


def test_lstm_cell_input_mismatch():
    z = lambda *s: T.Tensor(np.zeros(s))
    with pytest.raises(ShapeMismatch):
        T.lstm_cell_step(z(3), z(1), z(1), z(2, 4), z(1, 4), z(4))


def test_lstm_sequence_matches_cells(rng):
    w = T.lstm_init(rng, 3, 2)
    W, U, b = (T.Tensor(w[k]) for k in "WUb")
    x = rng.normal(size=(2, 4, 3))
    lengths = [4, 2]
    for reverse in (False, True):
        out = T.lstm_sequence(T.Tensor(x), W, U, b, lengths, reverse).data
        for bi, L in enumerate(lengths):
            h, c = T.Tensor(np.zeros(2)), T.Tensor(np.zeros(2))
            steps = range(L - 1, -1, -1) if reverse else range(L)
            for t in steps:
                h, c = T.lstm_cell_step(T.Tensor(x[bi, t]), h, c, W, U, b)
                np.testing.assert_allclose(out[bi, t], h.data, atol=1e-12)
            assert np.all(out[bi, L:] == 0)


def test_layer_norm_examples():
    one, zero = T.Tensor(np.ones(3)), T.Tensor(np.zeros(3))
    np.testing.assert_array_equal(T.layer_norm(T.Tensor([1.0, 1.0, 1.0]), one, zero).data, [0, 0, 0])
    out = T.layer_norm(T.Tensor([-1.0, 1.0]), T.Tensor(np.ones(2)), T.Tensor(np.zeros(2))).data
    np.testing.assert_allclose(out, np.array([-1.0, 1.0]) / math.sqrt(1 + 1e-5), atol=1e-12)
    b = T.Tensor([0.5, -2.0, 3.0])
    np.testing.assert_array_equal(T.layer_norm(T.Tensor([3.0, 1.0, 7.0]), zero, b).data, b.data)


def test_dropout_modes():
    x = T.Tensor(np.arange(5.0))
    assert T.dropout(x, 0.3, train=False) is x
    np.testing.assert_array_equal(T.dropout(x, 0.0, True, np.random.default_rng(0)).data, x.data)
    out = T.dropout(T.Tensor(np.ones(10000)), 0.3, True, np.random.default_rng(7)).data
    assert abs(out.mean() - 1.0) <= 0.03
    with pytest.raises(InvalidRate):
        T.dropout(x, 1.0, True, np.random.default_rng(0))


def test_backward_simple_cases():
    x = T.Tensor([1.0, 2.0, 3.0], requires_grad=True)
    np.testing.assert_array_equal(T.backward(T.sum(x)).of(x), [1, 1, 1])
    a, b = T.Tensor(2.0, requires_grad=True), T.Tensor(3.0, requires_grad=True)
    g = T.backward(a * b)
    assert g.of(a) == 3.0 and g.of(b) == 2.0


def test_backward_is_pure():
    x = T.Tensor([0.3, -1.2], requires_grad=True)
    loss = T.sum(T.tanh(x) * x)
    np.testing.assert_array_equal(T.backward(loss).of(x), T.backward(loss).of(x))


def test_backward_rejects_non_scalar():
    with pytest.raises(NonScalarLoss):
        T.backward(T.Tensor([1.0, 2.0], requires_grad=True) * 2.0)


def test_shared_subexpression_accumulates():
    x = T.Tensor(3.0, requires_grad=True)
    y = x * x
    assert T.backward(y + y).of(x) == pytest.approx(12.0)


def test_finite_diff_examples(rng):
    x = T.Tensor(rng.normal(size=5))
    assert T.finite_diff_check(lambda v: T.sum(v * v), x) <= 1e-6
    assert T.finite_diff_check(lambda v: T.sum(v * 0.0) + 4.0, x) == 0.0
    logits = T.Tensor(rng.normal(size=(3, 4)))
    target = np.array([1, 0, 3])
    xent = lambda z: -T.sum(T.index(T.log_softmax(z), (np.arange(3), target)))
    assert T.finite_diff_check(xent, logits) <= 1e-5


def test_adam_first_step_moves_by_lr():
    for g in (1e-3, 0.5, -7.0):
        p = T.Parameter.create("w", np.array([1.0, -2.0]))
        p.grad = np.full(2, g)
        before = p.value.data.copy()
        T.adam_update(p, 0.01)
        np.testing.assert_allclose(np.abs(p.value.data - before), 0.01, atol=1e-6)


def test_adam_zero_gradient_and_monotone():
    p = T.Parameter.create("w", np.array([0.5]))
    T.adam_update(p, 0.001)
    assert p.value.data[0] == 0.5
    p = T.Parameter.create("w", np.array([0.5]))
    seen = [0.5]
    for _ in range(2):
        p.grad = np.ones(1)
        T.adam_update(p, 0.001)
        seen.append(p.value.data[0])
    assert seen[0] > seen[1] > seen[2]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_composite_graph_gradients(seed):
    r = np.random.default_rng(seed)
    a = T.Tensor(r.normal(size=(3, 2)))
    b = T.Tensor(r.normal(size=(2, 4)))
    f = lambda x, y: T.sum(T.log_softmax(T.tanh(T.matmul(x, y))) * T.sigmoid(T.matmul(x, y)))
    assert T.finite_diff_check(f, [a, b]) <= 1e-5
