"""L-infinity attacks that step along the sign of the input gradient."""

from __future__ import annotations

from typing import Optional, Union

import numpy as np

from divens.attacks.config import AdvBatch, AttackConfig
from divens.attacks.loss import ascent_gradient, attack_succeeded, choose_targets
from divens.models.ensemble import Ensemble
from divens.rng import derive_rng

Budget = Union[float, np.ndarray]

L1_FLOOR = 1e-12


def clip_ball(x: np.ndarray, candidate: np.ndarray, eps: Budget) -> np.ndarray:
    """Clamp ``candidate`` into ``[max(0, x - eps), min(1, x + eps)]``."""
    eps = _column(eps, np.ndim(x))
    lower = np.maximum(0.0, x - eps)
    upper = np.minimum(1.0, x + eps)
    return np.minimum(np.maximum(candidate, lower), upper)


def _column(eps: Budget, ndim: int) -> Union[float, np.ndarray]:
    """Per-example budgets as a column so they broadcast over features."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 0:
        return float(eps)
    if np.any(eps < 0):
        raise ValueError("'eps' must be non-negative")
    return eps.reshape(-1, *([1] * (ndim - 1)))


def prepare_batch(x: np.ndarray, y: np.ndarray, indices: Optional[np.ndarray]):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.intp))
    if len(x) != len(y):
        raise ValueError("'x' and 'y' must have the same number of examples")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    indices = np.arange(len(y)) if indices is None else np.asarray(indices, dtype=np.int64)
    if len(indices) != len(y):
        raise ValueError("'indices' must have one entry per example")
    return x, y, indices


def sign_iterations(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    eps: Budget,
    steps: int,
    alpha: Budget,
    start: np.ndarray,
    targets: Optional[np.ndarray],
    momentum: Optional[float] = None,
) -> np.ndarray:
    """
    ``x_{i+1} = clip_ball(x_i + alpha * sgn(g_i))``, with ``g_i`` the raw
    ascent gradient or, when ``momentum`` is set, the accumulator
    ``mu * g_{i-1} + grad / ||grad||_1``.
    """
    alpha = _column(alpha, x.ndim)
    adv = start
    accumulated = np.zeros_like(x)
    for _ in range(steps):
        grad = ascent_gradient(ens, adv, y, targets, cfg)
        if momentum is not None:
            l1 = np.sum(np.abs(grad), axis=1, keepdims=True)
            accumulated = momentum * accumulated + grad / np.maximum(l1, L1_FLOOR)
            grad = accumulated
        adv = clip_ball(x, adv + alpha * np.sign(grad), eps)
    return adv


def _batch(ens, x, adv, y, targets, cfg: AttackConfig) -> AdvBatch:
    return AdvBatch(
        originals=x,
        adversarials=adv,
        labels=y,
        targets=targets,
        success=attack_succeeded(ens, adv, y, targets, cfg.victim),
        method=cfg.method,
        victim=cfg.victim_name,
    )


def fgsm(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
    eps: Optional[Budget] = None,
) -> AdvBatch:
    """Single step ``x + eps * sgn(grad)`` clamped to ``[0, 1]``."""
    x, y, indices = prepare_batch(x, y, indices)
    eps = cfg.eps if eps is None else eps
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    adv = sign_iterations(
        ens, x, y, cfg, eps=eps, steps=1, alpha=eps, start=x, targets=targets
    )
    return _batch(ens, x, adv, y, targets, cfg)


def bim(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
    eps: Optional[Budget] = None,
) -> AdvBatch:
    """``r`` clipped sign steps of size ``eps / r`` from ``x``."""
    x, y, indices = prepare_batch(x, y, indices)
    eps, alpha = _budget(cfg, eps)
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    adv = sign_iterations(
        ens, x, y, cfg, eps=eps, steps=cfg.steps, alpha=alpha, start=x, targets=targets
    )
    return _batch(ens, x, adv, y, targets, cfg)


def pgd_start(x: np.ndarray, eps: Budget, seed: int, indices: np.ndarray) -> np.ndarray:
    """Uniform start in the ball, one stream ``(seed, "pgd", index)`` per example."""
    width = np.broadcast_to(np.asarray(eps, dtype=np.float64), (len(x),))
    noise = np.zeros_like(x)
    for row, (index, w) in enumerate(zip(indices, width)):
        noise[row] = derive_rng(seed, "pgd", int(index)).uniform(-w, w, size=x.shape[1])
    return clip_ball(x, x + noise, eps)


def pgd(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
    eps: Optional[Budget] = None,
) -> AdvBatch:
    """BIM from a random point of the ball; ``random_init=False`` starts at ``x``."""
    x, y, indices = prepare_batch(x, y, indices)
    eps, alpha = _budget(cfg, eps)
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    start = pgd_start(x, eps, cfg.seed, indices) if cfg.random_init else x
    adv = sign_iterations(
        ens, x, y, cfg, eps=eps, steps=cfg.steps, alpha=alpha, start=start, targets=targets
    )
    return _batch(ens, x, adv, y, targets, cfg)


def mim(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
    eps: Optional[Budget] = None,
) -> AdvBatch:
    """BIM on the L1-normalised momentum accumulator."""
    x, y, indices = prepare_batch(x, y, indices)
    eps, alpha = _budget(cfg, eps)
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    adv = sign_iterations(
        ens,
        x,
        y,
        cfg,
        eps=eps,
        steps=cfg.steps,
        alpha=alpha,
        start=x,
        targets=targets,
        momentum=cfg.momentum_decay,
    )
    return _batch(ens, x, adv, y, targets, cfg)


def _budget(cfg: AttackConfig, eps: Optional[Budget]) -> tuple[Budget, Budget]:
    """Budget and step size; an explicit per-example budget keeps ``eps / r``."""
    if eps is None:
        return cfg.eps, cfg.alpha
    if cfg.step_size is not None:
        return eps, cfg.step_size
    return eps, np.asarray(eps, dtype=np.float64) / cfg.steps
