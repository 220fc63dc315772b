"""
Differentiable primitives.

Each primitive evaluates with numpy, records itself on the operands' graph
and supplies the adjoint rule used by :meth:`Graph.backward`. Binary
elementwise primitives accept numpy broadcasting between their operands; the
adjoint sums the broadcast axes back out.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from divens.errors import ShapeError, SingularMatrixError
from divens.numgrad.tensor import ArrayLike, Graph, Tensor

Operand = Union[Tensor, ArrayLike]

# Largest condition number accepted for an unregularised Gram matrix.
MAX_CONDITION = 1e12
# Floor used inside the entropy adjoint so that exact zeros give a finite slope.
LOG_FLOOR = 1e-12


def _graph_of(*operands: Operand) -> Graph:
    for x in operands:
        if isinstance(x, Tensor):
            return x.graph
    raise ValueError("at least one operand must be a Tensor")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(op: str, a: Operand, b: Operand) -> tuple[Graph, Tensor, Tensor]:
    g = _graph_of(a, b)
    ta, tb = g.lift(a), g.lift(b)
    try:
        np.broadcast_shapes(ta.shape, tb.shape)
    except ValueError:
        raise ShapeError(op, ta.shape, tb.shape) from None
    return g, ta, tb


# ---------- elementwise arithmetic ----------
def add(a: Operand, b: Operand) -> Tensor:
    g, ta, tb = _binary("add", a, b)
    return g.record(
        "add",
        (ta, tb),
        ta.data + tb.data,
        lambda gr: (_unbroadcast(gr, ta.shape), _unbroadcast(gr, tb.shape)),
    )


def sub(a: Operand, b: Operand) -> Tensor:
    g, ta, tb = _binary("sub", a, b)
    return g.record(
        "sub",
        (ta, tb),
        ta.data - tb.data,
        lambda gr: (_unbroadcast(gr, ta.shape), _unbroadcast(-gr, tb.shape)),
    )


def mul(a: Operand, b: Operand) -> Tensor:
    g, ta, tb = _binary("mul", a, b)
    return g.record(
        "mul",
        (ta, tb),
        ta.data * tb.data,
        lambda gr: (
            _unbroadcast(gr * tb.data, ta.shape),
            _unbroadcast(gr * ta.data, tb.shape),
        ),
    )


def div(a: Operand, b: Operand) -> Tensor:
    g, ta, tb = _binary("div", a, b)
    out = ta.data / tb.data
    return g.record(
        "div",
        (ta, tb),
        out,
        lambda gr: (
            _unbroadcast(gr / tb.data, ta.shape),
            _unbroadcast(-gr * out / tb.data, tb.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return a.graph.record("neg", (a,), -a.data, lambda gr: (-gr,))


def maximum(a: Tensor, floor: float) -> Tensor:
    """Elementwise ``max(a, floor)`` against a constant."""
    mask = a.data > floor
    return a.graph.record(
        "maximum", (a,), np.where(mask, a.data, floor), lambda gr: (gr * mask,)
    )


def where(mask: np.ndarray, a: Operand, b: Operand) -> Tensor:
    """Select ``a`` where ``mask`` holds and ``b`` elsewhere."""
    g, ta, tb = _binary("where", a, b)
    mask = np.asarray(mask, dtype=bool)
    return g.record(
        "where",
        (ta, tb),
        np.where(mask, ta.data, tb.data),
        lambda gr: (
            _unbroadcast(np.where(mask, gr, 0.0), ta.shape),
            _unbroadcast(np.where(mask, 0.0, gr), tb.shape),
        ),
    )


# ---------- elementwise functions ----------
def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return a.graph.record("relu", (a,), a.data * mask, lambda gr: (gr * mask,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return a.graph.record("exp", (a,), out, lambda gr: (gr * out,))


def log(a: Tensor) -> Tensor:
    return a.graph.record("log", (a,), np.log(a.data), lambda gr: (gr / a.data,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return a.graph.record("tanh", (a,), out, lambda gr: (gr * (1.0 - out * out),))


def xlogx(a: Tensor) -> Tensor:
    """``a * ln a`` with the convention ``0 * ln 0 = 0``."""
    x = a.data
    positive = x > 0.0
    out = np.where(positive, x * np.log(np.where(positive, x, 1.0)), 0.0)
    return a.graph.record(
        "xlogx",
        (a,),
        out,
        lambda gr: (gr * (np.log(np.maximum(x, LOG_FLOOR)) + 1.0),),
    )


# ---------- reductions ----------
def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            gr = np.expand_dims(gr, axis)
        return (np.broadcast_to(gr, a.shape).copy(),)

    return a.graph.record("sum", (a,), np.asarray(out), backward)


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]
    return div(sum(a, axis=axis, keepdims=keepdims), float(count))


def max(a: Tensor, axis: int = -1) -> Tensor:
    """Maximum along ``axis``; the adjoint goes to the lowest maximising index."""
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis)
    out = np.squeeze(out, axis=axis)

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis), np.expand_dims(gr, axis), axis)
        return (full,)

    return a.graph.record("max", (a,), out, backward)


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis in max-shifted form."""
    z = a.data - np.max(a.data, axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / np.sum(e, axis=-1, keepdims=True)
    return a.graph.record(
        "softmax",
        (a,),
        out,
        lambda gr: (out * (gr - np.sum(gr * out, axis=-1, keepdims=True)),),
    )


def log_softmax(a: Tensor) -> Tensor:
    """Log-sum-exp stabilised log of :func:`softmax`."""
    shifted = a.data - np.max(a.data, axis=-1, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    probs = np.exp(out)
    return a.graph.record(
        "log_softmax",
        (a,),
        out,
        lambda gr: (gr - probs * np.sum(gr, axis=-1, keepdims=True),),
    )


def l2_norm(a: Tensor, axis: int = -1, keepdims: bool = True) -> Tensor:
    out = np.sqrt(np.sum(a.data * a.data, axis=axis, keepdims=True))

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        if not keepdims:
            gr = np.expand_dims(gr, axis)
        safe = np.where(out > 0.0, out, 1.0)
        return (np.where(out > 0.0, gr * a.data / safe, 0.0),)

    value = out if keepdims else np.squeeze(out, axis=axis)
    return a.graph.record("l2_norm", (a,), value, backward)


# ---------- linear algebra ----------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or a.ndim != b.ndim:
        raise ShapeError("matmul", a.shape, b.shape, reason="operands need equal rank >= 2")
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    return a.graph.record(
        "matmul",
        (a, b),
        np.matmul(a.data, b.data),
        lambda gr: (
            np.matmul(gr, np.swapaxes(b.data, -1, -2)),
            np.matmul(np.swapaxes(a.data, -1, -2), gr),
        ),
    )


def _require_square(op: str, a: Tensor) -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(op, a.shape, reason="matrix must be square")


def _checked_inverse(op: str, m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise SingularMatrixError(
            f"{op}: matrix is singular", condition=float(np.max(np.linalg.cond(m)))
        ) from None


def det(a: Tensor) -> Tensor:
    """Determinant of the trailing square matrices (LU with partial pivoting)."""
    _require_square("det", a)
    out = np.linalg.det(a.data)

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        inv_t = np.swapaxes(_checked_inverse("det", a.data), -1, -2)
        return (np.asarray(gr * out)[..., None, None] * inv_t,)

    return a.graph.record("det", (a,), out, backward)


def inv(a: Tensor) -> Tensor:
    _require_square("inv", a)
    out = _checked_inverse("inv", a.data)
    out_t = np.swapaxes(out, -1, -2)
    return a.graph.record(
        "inv", (a,), out, lambda gr: (-np.matmul(np.matmul(out_t, gr), out_t),)
    )


def logdet(a: Tensor) -> Tensor:
    """``ln det a`` for matrices with positive determinant."""
    _require_square("logdet", a)
    sign, out = np.linalg.slogdet(a.data)
    if np.any(sign <= 0):
        raise SingularMatrixError(
            "logdet: determinant is not positive",
            condition=float(np.max(np.linalg.cond(a.data))),
        )

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        inv_t = np.swapaxes(_checked_inverse("logdet", a.data), -1, -2)
        return (np.asarray(gr)[..., None, None] * inv_t,)

    return a.graph.record("logdet", (a,), out, backward)


def logdet_gram(c: Tensor, offset: float = 0.0) -> Tensor:
    """
    Fused ``ln det(C C^T + offset * I)`` for row-stacked vectors ``C``.

    ``C`` has shape ``(..., K, m)``; each row is one vector and the Gram
    matrix is ``K x K``. The adjoint is ``2 G^{-1} C``. Without an offset a
    numerically singular Gram matrix is rejected with its condition number.
    """
    if c.ndim < 2:
        raise ShapeError("logdet_gram", c.shape, reason="expected (..., K, m)")
    k = c.shape[-2]
    gram = np.matmul(c.data, np.swapaxes(c.data, -1, -2)) + offset * np.eye(k)
    if offset <= 0.0:
        cond = float(np.max(np.linalg.cond(gram)))
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise SingularMatrixError(
                "logdet_gram: Gram matrix is singular; use a positive offset",
                condition=cond,
            )
    sign, out = np.linalg.slogdet(gram)
    if np.any(sign <= 0):
        raise SingularMatrixError(
            "logdet_gram: Gram determinant is not positive",
            condition=float(np.max(np.linalg.cond(gram))),
        )

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        solved = np.linalg.solve(gram, c.data)
        return (2.0 * np.asarray(gr)[..., None, None] * solved,)

    return c.graph.record("logdet_gram", (c,), out, backward)


# ---------- structure ----------
def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None
    return a.graph.record("reshape", (a,), out, lambda gr: (gr.reshape(a.shape),))


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    return a.graph.record(
        "swapaxes",
        (a,),
        np.swapaxes(a.data, axis1, axis2),
        lambda gr: (np.swapaxes(gr, axis1, axis2),),
    )


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("concatenate needs at least one tensor")
    g = tensors[0].graph
    parts = [g.lift(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in parts], axis=axis)
    except ValueError:
        raise ShapeError("concatenate", *(t.shape for t in parts)) from None
    bounds = np.cumsum([t.shape[axis] for t in parts])[:-1]
    return g.record(
        "concatenate",
        parts,
        out,
        lambda gr: tuple(np.split(gr, bounds, axis=axis)),
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ValueError("stack needs at least one tensor")
    g = tensors[0].graph
    parts = [g.lift(t) for t in tensors]
    try:
        out = np.stack([t.data for t in parts], axis=axis)
    except ValueError:
        raise ShapeError("stack", *(t.shape for t in parts)) from None
    return g.record(
        "stack",
        parts,
        out,
        lambda gr: tuple(np.moveaxis(gr, axis, 0)),
    )


def gather(a: Tensor, index: np.ndarray, axis: int = -1) -> Tensor:
    """``take_along_axis`` with an integer index array."""
    index = np.asarray(index, dtype=np.intp)
    try:
        out = np.take_along_axis(a.data, index, axis=axis)
    except (ValueError, IndexError):
        raise ShapeError("gather", a.shape, index.shape) from None

    def backward(gr: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        np.add.at(full, _along_axis_key(index, axis, a.ndim), gr)
        return (full,)

    return a.graph.record("gather", (a,), out, backward)


def _along_axis_key(index: np.ndarray, axis: int, ndim: int) -> tuple:
    axis = axis % ndim
    grids = np.indices(index.shape, sparse=True)
    return tuple(index if d == axis else grids[d] for d in range(ndim))


def pick(a: Tensor, index: np.ndarray) -> Tensor:
    """Entry ``index`` of the last axis, one per leading position."""
    index = np.asarray(index, dtype=np.intp)
    if index.shape != a.shape[:-1]:
        index = np.broadcast_to(index, a.shape[:-1])
    picked = gather(a, index[..., None], axis=-1)
    return reshape(picked, a.shape[:-1])


def remove_index(a: Tensor, index: np.ndarray) -> Tensor:
    """Drop entry ``index`` of the last axis, preserving the order of the rest."""
    n = a.shape[-1]
    if n < 2:
        raise ShapeError("remove_index", a.shape, reason="last axis needs >= 2 entries")
    index = np.broadcast_to(np.asarray(index, dtype=np.intp), a.shape[:-1])
    if np.any(index < 0) or np.any(index >= n):
        raise ShapeError("remove_index", a.shape, index.shape, reason="index out of range")
    base = np.arange(n - 1)
    keep = base + (base >= index[..., None])
    return gather(a, keep, axis=-1)
