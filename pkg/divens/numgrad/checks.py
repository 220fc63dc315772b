from __future__ import annotations

from typing import Callable

import numpy as np

from divens.numgrad.tensor import Graph, Tensor

ScalarFn = Callable[[Tensor], Tensor]


def value_and_grad(f: ScalarFn, point: np.ndarray) -> tuple[float, np.ndarray]:
    """Evaluate ``f`` at ``point`` on a fresh graph and differentiate it."""
    graph = Graph()
    x = graph.leaf(point, requires_grad=True)
    loss = f(x)
    grads = graph.backward(loss)
    return loss.item(), grads[x]


def evaluate(f: ScalarFn, point: np.ndarray) -> float:
    graph = Graph()
    return f(graph.constant(point)).item()


def finite_diff_check(f: ScalarFn, point: np.ndarray, h: float = 1e-5) -> float:
    """
    Largest relative disagreement between the reverse-mode gradient of ``f``
    and central differences with step ``h``:

        max_i |analytic_i - fd_i| / (|fd_i| + 1e-8)
    """
    if h <= 0:
        raise ValueError("'h' must be positive")
    point = np.array(point, dtype=np.float64)
    _, analytic = value_and_grad(f, point)

    flat = point.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += h
        minus[i] -= h
        fd = (evaluate(f, plus.reshape(point.shape)) - evaluate(f, minus.reshape(point.shape))) / (2.0 * h)
        err = abs(analytic.reshape(-1)[i] - fd) / (abs(fd) + 1e-8)
        worst = max(worst, err)
    return float(worst)
