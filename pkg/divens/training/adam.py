from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from divens.errors import ShapeError

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass(frozen=True, kw_only=True, eq=False)
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    t: int = 0

    @classmethod
    def zeros(cls, params: Sequence[np.ndarray]) -> AdamState:
        return cls(
            m=tuple(np.zeros_like(p, dtype=np.float64) for p in params),
            v=tuple(np.zeros_like(p, dtype=np.float64) for p in params),
        )


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[tuple[np.ndarray, ...], AdamState]:
    """One bias-corrected Adam update; returns new arrays and a new state."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("adam_step", (len(params),), (len(grads),), (len(state.m),))
    for p, g, m in zip(params, grads, state.m):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise ShapeError("adam_step", np.shape(p), np.shape(g), np.shape(m))

    t = state.t + 1
    correction1 = 1.0 - BETA1**t
    correction2 = 1.0 - BETA2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = BETA1 * m + (1.0 - BETA1) * g
        v = BETA2 * v + (1.0 - BETA2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + EPSILON))
        new_m.append(m)
        new_v.append(v)
    return tuple(new_params), AdamState(m=tuple(new_m), v=tuple(new_v), t=t)
