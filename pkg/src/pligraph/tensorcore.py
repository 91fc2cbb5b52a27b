"""Dense 2-D tensors with reverse-mode automatic differentiation.

A ``Tape`` records every operation whose inputs are tracked; backward walks
the records in reverse append order exactly once, accumulating gradients
across fan-out. Values are always float64 matrices of shape (rows, cols);
scalars live as (1, 1). The only implicit broadcasting is scalar-tensor:
a (1, 1) operand broadcasts against any shape in the elementwise ops.

Every operation validates shapes up front and checks the result for
non-finite entries (NaN/Inf raise ``NumericError``).
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericError, ShapeError

_IDS = itertools.count(1)
_ACTIVE = threading.local()


def _tape_stack() -> list:
    stack = getattr(_ACTIVE, "stack", None)
    if stack is None:
        stack = []
        _ACTIVE.stack = stack
    return stack


def _active_tape() -> Optional["Tape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A float64 matrix, optionally participating in differentiation."""

    __slots__ = ("data", "requires_grad", "node_id")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, (int, float, np.floating, np.integer)):
            arr = np.array([[float(data)]])
        else:
            arr = np.ascontiguousarray(data, dtype=np.float64)
            if arr.ndim != 2:
                raise ShapeError(f"tensors are 2-D matrices, got ndim={arr.ndim}")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_IDS)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a (1, 1) tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; the module-level functions do the real work.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Ordered operation record; append order is the topological order."""

    def __init__(self):
        self._records: list[tuple[int, tuple, Callable]] = []
        self._live: set[int] = set()
        self._leaves: dict[int, tuple[int, int]] = {}

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self

    def _tracks(self, t: Tensor) -> bool:
        return t.requires_grad or t.node_id in self._live

    def record(self, out: Tensor, inputs: Sequence[Tensor],
               backward: Callable[[np.ndarray], tuple]) -> None:
        """Append one op; ``backward(g)`` must return per-input gradients
        aligned with ``inputs`` (entries for untracked inputs are ignored)."""
        ids = []
        for t in inputs:
            if self._tracks(t):
                ids.append(t.node_id)
                if t.requires_grad:
                    self._leaves[t.node_id] = t.data.shape
            else:
                ids.append(None)
        self._records.append((out.node_id, tuple(ids), backward))
        self._live.add(out.node_id)

    def backward(self, loss: Tensor) -> dict[int, Tensor]:
        """Gradients of a tracked scalar w.r.t. every requires_grad tensor."""
        if loss.data.shape != (1, 1):
            raise ShapeError(f"loss must be scalar (1, 1), got {loss.data.shape}")
        if loss.node_id not in self._live:
            raise ValueError("loss tensor is not tracked on this tape")
        grads: dict[int, np.ndarray] = {loss.node_id: np.ones((1, 1))}
        for out_id, input_ids, backward in reversed(self._records):
            g = grads.get(out_id)
            if g is None:
                continue
            contribs = backward(g)
            for inp_id, contrib in zip(input_ids, contribs):
                if inp_id is None or contrib is None:
                    continue
                acc = grads.get(inp_id)
                grads[inp_id] = contrib if acc is None else acc + contrib
        out = {}
        for leaf_id, shape in self._leaves.items():
            g = grads.get(leaf_id)
            out[leaf_id] = Tensor(g if g is not None else np.zeros(shape))
        return out


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by {op}")


def record_op(out: Tensor, inputs: Sequence[Tensor],
              backward: Callable[[np.ndarray], tuple], op: str) -> Tensor:
    """Finalize an op: finiteness check plus tape recording if any input
    is tracked on the active tape. Used by primitives and fused kernels."""
    _check_finite(out.data, op)
    tape = _active_tape()
    if tape is not None and any(tape._tracks(t) for t in inputs):
        tape.record(out, inputs, backward)
    return out


# ---------------------------------------------------------------------------
# elementwise binary ops (same shape, or (1, 1) broadcast on either side)

def _binary_shapes(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape and a.data.shape != (1, 1) and b.data.shape != (1, 1):
        raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}")


def _reduce_to(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return grad.sum().reshape(1, 1)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "add")
    out = Tensor(a.data + b.data)
    return record_op(out, (a, b), lambda g: (
        _reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "sub")
    out = Tensor(a.data - b.data)
    return record_op(out, (a, b), lambda g: (
        _reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "mul")
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data
    return record_op(out, (a, b), lambda g: (
        _reduce_to(g * bd, ad.shape), _reduce_to(g * ad, bd.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes(a, b, "div")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Tensor(a.data / b.data)  # non-finite trips NumericError below
    ad, bd = a.data, b.data
    return record_op(out, (a, b), lambda g: (
        _reduce_to(g / bd, ad.shape),
        _reduce_to(-g * ad / (bd * bd), bd.shape)), "div")


# ---------------------------------------------------------------------------
# structural ops

def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul: {a.data.shape} @ {b.data.shape} have mismatched inner dims")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data
    return record_op(out, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def transpose(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.T.copy())
    return record_op(out, (a,), lambda g: (g.T.copy(),), "transpose")


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(
            f"concat_cols: row counts differ ({a.data.shape} vs {b.data.shape})")
    out = Tensor(np.hstack([a.data, b.data]))
    na = a.data.shape[1]
    return record_op(out, (a, b), lambda g: (g[:, :na], g[:, na:]), "concat_cols")


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.shape[1] != b.data.shape[1]:
        raise ShapeError(
            f"concat_rows: column counts differ ({a.data.shape} vs {b.data.shape})")
    out = Tensor(np.vstack([a.data, b.data]))
    na = a.data.shape[0]
    return record_op(out, (a, b), lambda g: (g[:na, :], g[na:, :]), "concat_rows")


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)
    rows = a.data.shape[0]
    if not (0 <= start <= stop <= rows):
        raise ShapeError(f"row_slice [{start}:{stop}] outside 0..{rows}")
    out = Tensor(a.data[start:stop, :].copy())

    def backward(g):
        full = np.zeros_like(a.data)
        full[start:stop, :] = g
        return (full,)

    return record_op(out, (a,), backward, "row_slice")


# ---------------------------------------------------------------------------
# reductions

def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum().reshape(1, 1))
    shape = a.data.shape
    return record_op(out, (a,), lambda g: (np.full(shape, g[0, 0]),), "sum_all")


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size
    out = Tensor(a.data.mean().reshape(1, 1))
    shape = a.data.shape
    return record_op(out, (a,), lambda g: (np.full(shape, g[0, 0] / n),), "mean_all")


def row_sum(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum(axis=1, keepdims=True))
    cols = a.data.shape[1]
    return record_op(out, (a,), lambda g: (np.repeat(g, cols, axis=1),), "row_sum")


def row_mean(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    cols = a.data.shape[1]
    out = Tensor(a.data.mean(axis=1, keepdims=True))
    return record_op(out, (a,), lambda g: (np.repeat(g / cols, cols, axis=1),), "row_mean")


# ---------------------------------------------------------------------------
# elementwise unary ops

def neg(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(-a.data)
    return record_op(out, (a,), lambda g: (-g,), "neg")


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0))
    pos = a.data > 0
    return record_op(out, (a,), lambda g: (g * pos,), "relu")


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Overflow-free logistic function, shared with the kernel fallback."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    s = stable_sigmoid(a.data)
    out = Tensor(s)
    return record_op(out, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)
    out = Tensor(t)
    return record_op(out, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def exp(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        e = np.exp(a.data)  # overflow trips NumericError below
    out = Tensor(e)
    return record_op(out, (a,), lambda g: (g * e,), "exp")


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise NumericError("log of non-positive value")
    out = Tensor(np.log(a.data))
    ad = a.data
    return record_op(out, (a,), lambda g: (g / ad,), "log")


def absval(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.abs(a.data))
    sign = np.sign(a.data)
    return record_op(out, (a,), lambda g: (g * sign,), "absval")


# ---------------------------------------------------------------------------
# graph-specific primitives

def masked_softmax_forward(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Row softmax over masked-in entries with max subtraction.

    Masked-out entries are exactly zero; rows with an empty mask come back
    all-zero (adjacency self-loops keep that case out of real graphs).
    """
    neg = np.where(mask, x, -np.inf)
    rowmax = neg.max(axis=1, keepdims=True, initial=-np.inf)
    rowmax = np.where(np.isfinite(rowmax), rowmax, 0.0)
    z = np.exp(np.where(mask, x - rowmax, -np.inf))
    denom = z.sum(axis=1, keepdims=True)
    return z / np.where(denom == 0.0, 1.0, denom)


def masked_row_softmax(a: Tensor, mask: np.ndarray) -> Tensor:
    a = _as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape:
        raise ShapeError(
            f"masked_row_softmax: mask {mask.shape} vs tensor {a.data.shape}")
    s = masked_softmax_forward(a.data, mask)
    out = Tensor(s)

    def backward(g):
        dot = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - dot),)

    return record_op(out, (a,), backward, "masked_row_softmax")


def scatter_symmetric(values: Tensor, pairs: Sequence[tuple[int, int]], n: int) -> Tensor:
    """Place a (K, 1) value column symmetrically at off-diagonal index pairs
    of an (n, n) matrix. Used to inject distance weights into an adjacency."""
    values = _as_tensor(values)
    k = len(pairs)
    if values.data.shape != (k, 1):
        raise ShapeError(
            f"scatter_symmetric: expected ({k}, 1) values, got {values.data.shape}")
    mat = np.zeros((n, n))
    for t, (i, j) in enumerate(pairs):
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ShapeError(f"scatter_symmetric: bad pair ({i}, {j}) for n={n}")
        mat[i, j] += values.data[t, 0]
        mat[j, i] += values.data[t, 0]
    out = Tensor(mat)

    def backward(g):
        gv = np.empty((k, 1))
        for t, (i, j) in enumerate(pairs):
            gv[t, 0] = g[i, j] + g[j, i]
        return (gv,)

    return record_op(out, (values,), backward, "scatter_symmetric")
