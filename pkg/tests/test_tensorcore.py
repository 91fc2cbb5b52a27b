import numpy as np
import pytest

import pligraph.tensorcore as tc
from pligraph.errors import NumericError, ShapeError
from pligraph.tensorcore import Tape, Tensor


def fd_gradient(loss_fn, tensor, h=1e-6):
    """Central finite differences of a scalar-valued closure."""
    grad = np.zeros_like(tensor.data)
    it = np.nditer(tensor.data, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        keep = tensor.data[idx]
        tensor.data[idx] = keep + h
        f1 = loss_fn()
        tensor.data[idx] = keep - h
        f2 = loss_fn()
        tensor.data[idx] = keep
        grad[idx] = (f1 - f2) / (2.0 * h)
        it.iternext()
    return grad


def assert_close_rel(a, b, tol=1e-4):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    assert np.max(np.abs(a - b) / denom) <= tol


# ---------------------------------------------------------------------------
# forward semantics

def test_scalar_construction_and_item():
    t = Tensor(3.5)
    assert t.shape == (1, 1)
    assert t.item() == 3.5
    with pytest.raises(ShapeError):
        Tensor(np.zeros(3))


def test_matmul_identity():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    out = tc.matmul(a, Tensor(np.eye(2)))
    assert np.array_equal(out.data, a.data)


def test_matmul_shape_error_names_shapes():
    with pytest.raises(ShapeError) as err:
        tc.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    assert "(2, 3)" in str(err.value)


def test_sigmoid_and_tanh_values():
    assert tc.sigmoid(Tensor(0.0)).item() == 0.5
    assert tc.tanh(Tensor(0.0)).item() == 0.0
    assert tc.sigmoid(Tensor(100.0)).item() == pytest.approx(1.0)
    assert tc.sigmoid(Tensor(-100.0)).item() == pytest.approx(0.0, abs=1e-30)


def test_masked_softmax_uniform_row():
    m = Tensor(np.zeros((1, 3)))
    out = tc.masked_row_softmax(m, np.ones((1, 3), dtype=bool))
    assert np.allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]])


def test_masked_softmax_rows_sum_to_one_masked_out_zero(rng):
    x = Tensor(rng.normal(size=(5, 5)) * 10)
    mask = rng.random((5, 5)) > 0.4
    mask[2, :] = False  # empty row stays all-zero
    out = tc.masked_row_softmax(x, mask).data
    assert np.all(out[~mask] == 0.0)
    sums = out.sum(axis=1)
    assert np.allclose(sums[[0, 1, 3, 4]], 1.0)
    assert sums[2] == 0.0


def test_masked_softmax_overflow_safe():
    x = Tensor(np.array([[1000.0, 1000.0, -1000.0]]))
    out = tc.masked_row_softmax(x, np.array([[True, True, False]]))
    assert np.allclose(out.data, [[0.5, 0.5, 0.0]])


def test_scalar_broadcast_ops():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    s = Tensor(2.0)
    assert np.array_equal(tc.mul(a, s).data, a.data * 2)
    assert np.array_equal(tc.add(s, a).data, a.data + 2)
    assert np.array_equal(tc.sub(1.0, a).data, 1.0 - a.data)
    assert np.array_equal(tc.div(a, 2.0).data, a.data / 2)
    with pytest.raises(ShapeError):
        tc.add(a, Tensor(np.zeros((3, 3))))


def test_non_finite_result_raises():
    with pytest.raises(NumericError):
        tc.exp(Tensor(1000.0))
    with pytest.raises(NumericError):
        tc.div(Tensor(1.0), Tensor(0.0))
    with pytest.raises(NumericError):
        tc.log(Tensor(-1.0))


def test_concat_and_slice():
    a = Tensor(np.array([[1.0, 2.0]]))
    b = Tensor(np.array([[3.0]]))
    assert np.array_equal(tc.concat_cols(a, b).data, [[1.0, 2.0, 3.0]])
    c = Tensor(np.array([[1.0], [2.0], [3.0]]))
    assert np.array_equal(tc.row_slice(c, 1, 3).data, [[2.0], [3.0]])
    assert np.array_equal(tc.concat_rows(a, Tensor(np.array([[9.0, 9.0]]))).data,
                          [[1.0, 2.0], [9.0, 9.0]])


def test_reductions():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert tc.sum_all(a).item() == 10.0
    assert tc.mean_all(a).item() == 2.5
    assert np.array_equal(tc.row_sum(a).data, [[3.0], [7.0]])
    assert np.array_equal(tc.row_mean(a).data, [[1.5], [3.5]])


# ---------------------------------------------------------------------------
# tape semantics

def test_backward_fan_out_accumulates():
    w = Tensor(1.5, requires_grad=True)
    with Tape() as tape:
        loss = tc.add(w, w)
    grads = tape.backward(loss)
    assert grads[w.node_id].item() == 2.0


def test_backward_sigmoid_at_zero():
    w = Tensor(0.0, requires_grad=True)
    with Tape() as tape:
        loss = tc.mul(tc.sigmoid(w), 3.0)
    grads = tape.backward(loss)
    assert grads[w.node_id].item() == pytest.approx(0.25 * 3.0, rel=1e-12)


def test_backward_matmul_structure():
    w = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]), requires_grad=True)
    x = np.array([[5.0], [7.0]])
    with Tape() as tape:
        loss = tc.sum_all(tc.matmul(w, Tensor(x)))
    grads = tape.backward(loss)
    assert np.array_equal(grads[w.node_id].data, np.tile(x.T, (2, 1)))


def test_backward_requires_tracked_scalar():
    w = Tensor(1.0, requires_grad=True)
    with Tape() as tape:
        loss = tc.add(w, 1.0)
        vec = tc.concat_cols(loss, loss)
    with pytest.raises(ShapeError):
        tape.backward(vec)
    untracked = Tensor(2.0)
    with pytest.raises(ValueError):
        tape.backward(untracked)


def test_unused_params_get_zero_gradients():
    w = Tensor(1.0, requires_grad=True)
    unused = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = tc.mul(w, w)
        _ = tc.mul(unused, 2.0)  # on tape, but not feeding the loss
    grads = tape.backward(loss)
    assert np.array_equal(grads[unused.node_id].data, np.zeros((2, 2)))
    assert grads[w.node_id].item() == 2.0


def test_no_recording_without_tape():
    w = Tensor(1.0, requires_grad=True)
    out = tc.mul(w, 2.0)  # no active tape: plain numpy math
    assert out.item() == 2.0


def test_forward_and_backward_deterministic(rng):
    x = rng.normal(size=(4, 4))
    w = Tensor(x.copy(), requires_grad=True)
    results = []
    for _ in range(2):
        with Tape() as tape:
            loss = tc.sum_all(tc.relu(tc.matmul(w, tc.transpose(w))))
        g = tape.backward(loss)[w.node_id].data
        results.append((loss.item(), g.copy()))
    assert results[0][0] == results[1][0]
    assert np.array_equal(results[0][1], results[1][1])


# ---------------------------------------------------------------------------
# gradient checks, one primitive at a time

@pytest.mark.parametrize("name,build", [
    ("matmul", lambda w, c: tc.matmul(w, c)),
    ("add", lambda w, c: tc.add(w, c)),
    ("sub", lambda w, c: tc.sub(c, w)),
    ("mul", lambda w, c: tc.mul(w, c)),
    ("div", lambda w, c: tc.div(c, tc.add(tc.mul(w, w), 1.0))),
    ("transpose", lambda w, c: tc.matmul(tc.transpose(w), c)),
    ("relu", lambda w, c: tc.relu(tc.matmul(w, c))),
    ("sigmoid", lambda w, c: tc.sigmoid(tc.matmul(w, c))),
    ("tanh", lambda w, c: tc.tanh(tc.matmul(w, c))),
    ("exp", lambda w, c: tc.exp(tc.mul(w, 0.3))),
    ("log", lambda w, c: tc.log(tc.add(tc.mul(w, w), 1.5))),
    ("absval", lambda w, c: tc.absval(tc.matmul(w, c))),
    ("row_sum", lambda w, c: tc.row_sum(tc.matmul(w, c))),
    ("row_mean", lambda w, c: tc.row_mean(w)),
    ("mean_all", lambda w, c: tc.mean_all(tc.mul(w, w))),
    ("concat_cols", lambda w, c: tc.concat_cols(tc.mul(w, 2.0), tc.matmul(w, c))),
    ("concat_rows", lambda w, c: tc.concat_rows(tc.mul(w, 2.0), tc.transpose(tc.matmul(w, c)))),
    ("row_slice", lambda w, c: tc.row_slice(tc.mul(w, w), 1, 3)),
])
def test_primitive_gradients_match_finite_differences(name, build, rng):
    w = Tensor(rng.uniform(-1, 1, size=(4, 4)), requires_grad=True)
    c = Tensor(rng.uniform(-1, 1, size=(4, 4)))

    def loss_fn():
        return tc.sum_all(tc.mul(build(w, c), scale)).item()

    scale = Tensor(rng.uniform(0.5, 1.5, size=build(w, c).shape))
    with Tape() as tape:
        loss = tc.sum_all(tc.mul(build(w, c), scale))
    grads = tape.backward(loss)
    assert_close_rel(grads[w.node_id].data, fd_gradient(loss_fn, w))


def test_masked_softmax_gradient(rng):
    w = Tensor(rng.uniform(-1, 1, size=(4, 4)), requires_grad=True)
    mask = rng.random((4, 4)) > 0.3
    mask[:, 0] = True
    scale = Tensor(rng.uniform(0.5, 1.5, size=(4, 4)))

    def loss_fn():
        return tc.sum_all(tc.mul(tc.masked_row_softmax(w, mask), scale)).item()

    with Tape() as tape:
        loss = tc.sum_all(tc.mul(tc.masked_row_softmax(w, mask), scale))
    grads = tape.backward(loss)
    assert_close_rel(grads[w.node_id].data, fd_gradient(loss_fn, w))


def test_scatter_symmetric_gradient(rng):
    w = Tensor(rng.uniform(0.5, 1.5, size=(3, 1)), requires_grad=True)
    pairs = [(0, 2), (1, 3), (0, 4)]
    scale = Tensor(rng.uniform(0.5, 1.5, size=(5, 5)))

    def loss_fn():
        return tc.sum_all(tc.mul(tc.scatter_symmetric(w, pairs, 5), scale)).item()

    with Tape() as tape:
        loss = tc.sum_all(tc.mul(tc.scatter_symmetric(w, pairs, 5), scale))
    grads = tape.backward(loss)
    assert_close_rel(grads[w.node_id].data, fd_gradient(loss_fn, w))


def test_scatter_symmetric_values_and_errors(rng):
    w = Tensor(np.array([[0.5], [0.25]]))
    out = tc.scatter_symmetric(w, [(0, 1), (1, 2)], 3)
    expected = np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 0.25], [0.0, 0.25, 0.0]])
    assert np.array_equal(out.data, expected)
    with pytest.raises(ShapeError):
        tc.scatter_symmetric(w, [(0, 0), (1, 2)], 3)


def test_scalar_broadcast_gradients(rng):
    s = Tensor(rng.uniform(0.5, 1.5), requires_grad=True)
    c = Tensor(rng.uniform(-1, 1, size=(3, 3)))

    def loss_fn():
        return tc.sum_all(tc.div(tc.mul(tc.add(c, s), tc.sub(c, s)), s)).item()

    with Tape() as tape:
        loss = tc.sum_all(tc.div(tc.mul(tc.add(c, s), tc.sub(c, s)), s))
    grads = tape.backward(loss)
    assert_close_rel(grads[s.node_id].data, fd_gradient(loss_fn, s))
