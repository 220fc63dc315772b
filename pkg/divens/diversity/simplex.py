from __future__ import annotations

import numpy as np


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """
    Euclidean projection of each row of ``v`` onto the probability simplex.

    Sort-based: with ``u`` the row sorted in decreasing order, the threshold
    is ``theta = (sum(u[:rho + 1]) - 1) / (rho + 1)`` for the largest ``rho``
    with ``u[rho] > theta`` and the projection is ``max(v - theta, 0)``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise ValueError("cannot project an empty vector onto the simplex")
    if not np.all(np.isfinite(v)):
        raise ValueError("simplex projection input must be finite")

    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ranks = np.arange(1, v.shape[-1] + 1)
    support = u - css / ranks > 0.0
    rho = v.shape[-1] - 1 - np.argmax(support[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(v - theta, 0.0)
