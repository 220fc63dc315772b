from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from divens.errors import ShapeError

ArrayLike = Union[float, int, Sequence[float], np.ndarray]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    Dense float64 array bound to the :class:`Graph` that produced it.

    Leaves are created with :meth:`Graph.leaf` (or :meth:`Graph.constant`);
    every other tensor is the output of a primitive in
    :mod:`divens.numgrad.ops`. The arithmetic operators delegate to those
    primitives, so ``a @ w + b`` records a matmul and an add.
    """

    __slots__ = ("data", "requires_grad", "graph", "grad")

    def __init__(self, data: np.ndarray, graph: Graph, requires_grad: bool = False):
        self.data = data
        self.graph = graph
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, reason="tensor is not scalar")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ---------- operators ----------
    def __add__(self, other: Union[Tensor, ArrayLike]) -> Tensor:
        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return ops.add(other, self)

    def __sub__(self, other: Union[Tensor, ArrayLike]) -> Tensor:
        return ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return ops.sub(other, self)

    def __mul__(self, other: Union[Tensor, ArrayLike]) -> Tensor:
        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return ops.mul(other, self)

    def __truediv__(self, other: Union[Tensor, ArrayLike]) -> Tensor:
        return ops.div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> Tensor:
        return ops.div(other, self)

    def __neg__(self) -> Tensor:
        return ops.neg(self)

    def __matmul__(self, other: Tensor) -> Tensor:
        return ops.matmul(self, other)


@dataclass(eq=False)
class Node:
    """One recorded primitive: its tag, operands, result and adjoint rule."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


@dataclass(eq=False)
class Gradients:
    """Gradient buffers of one backward pass, keyed by leaf tensor."""

    buffers: dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        buf = self.buffers.get(id(tensor))
        if buf is None:
            return np.zeros_like(tensor.data)
        return buf

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self.buffers


class Graph:
    """
    Append-only tape of primitive operations.

    Nodes are appended in evaluation order, so the tape is already a
    topological order and :meth:`backward` only has to walk it in reverse.
    A graph is used by one thread; independent graphs share nothing.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._leaves: list[Tensor] = []

    def leaf(self, data: ArrayLike, requires_grad: bool = False) -> Tensor:
        arr = np.array(data, dtype=np.float64)
        t = Tensor(arr, self, requires_grad=requires_grad)
        self._leaves.append(t)
        return t

    def constant(self, data: ArrayLike) -> Tensor:
        return self.leaf(data, requires_grad=False)

    def lift(self, value: Union[Tensor, ArrayLike]) -> Tensor:
        """Return ``value`` as a tensor on this graph."""
        if isinstance(value, Tensor):
            if value.graph is not self:
                raise ValueError("tensors from different graphs cannot be combined")
            return value
        return self.constant(value)

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        out: np.ndarray,
        backward: BackwardFn,
    ) -> Tensor:
        requires_grad = any(t.requires_grad for t in inputs)
        tensor = Tensor(np.asarray(out, dtype=np.float64), self, requires_grad)
        if requires_grad:
            self.nodes.append(Node(op, tuple(inputs), tensor, backward))
        return tensor

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> Gradients:
        """
        Reverse-mode sweep from the scalar ``loss``.

        Returns the gradient of ``loss`` with respect to every leaf created
        with ``requires_grad=True``; leaves the loss does not depend on get a
        zero buffer. The buffers are also stored on ``leaf.grad``.
        """
        if loss.graph is not self:
            raise ValueError("loss was not produced by this graph")
        if loss.data.size != 1:
            raise ShapeError("backward", loss.shape, reason="loss must be a scalar")

        adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = adjoints.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gi in zip(node.inputs, node.backward(g)):
                if gi is None or not inp.requires_grad:
                    continue
                gi = np.asarray(gi, dtype=np.float64)
                key = id(inp)
                if key in adjoints:
                    adjoints[key] = adjoints[key] + gi
                else:
                    adjoints[key] = gi

        grads = Gradients()
        for leaf in self._leaves:
            if not leaf.requires_grad:
                continue
            buf = adjoints.get(id(leaf))
            if buf is None:
                buf = np.zeros_like(leaf.data)
            leaf.grad = buf
            grads.buffers[id(leaf)] = buf
        return grads


def backward(loss: Tensor) -> Gradients:
    """Gradients of ``loss`` w.r.t. all ``requires_grad`` leaves of its graph."""
    return loss.graph.backward(loss)


from divens.numgrad import ops  # noqa: E402  (operators above resolve lazily)
