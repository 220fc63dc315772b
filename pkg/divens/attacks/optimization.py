"""
Optimisation attacks in the tanh box parameterisation
``x*(w) = (tanh(w) + 1) / 2``.

Both attacks minimise ``||x* - x||_2^2 + c * f(x*)`` with Adam over ``w``;
the elastic-net variant adds ``beta * ||x* - x||_1`` and handles it with a
soft-thresholding step on the perturbation after every Adam step.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from divens.attacks.config import AdvBatch, AttackConfig
from divens.attacks.gradient_sign import prepare_batch
from divens.attacks.loss import choose_targets, victim_logits
from divens.models.ensemble import Ensemble
from divens.numgrad import Graph, Tensor, ops
from divens.training.adam import AdamState, adam_step

BOX_MARGIN = 1e-6


def tanh_image(omega: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(omega) + 1.0)


def to_omega(x: np.ndarray) -> np.ndarray:
    """Inverse of :func:`tanh_image`, pulled slightly inside the box."""
    return np.arctanh(np.clip(2.0 * x - 1.0, -1.0 + BOX_MARGIN, 1.0 - BOX_MARGIN))


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """``sign(v) * max(|v| - tau, 0)``."""
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def cw_margin(z: np.ndarray, label: int, kappa: float = 0.0, *, targeted: bool = True) -> float:
    """
    The margin term ``f`` the C&W and EAD attacks minimise, for one example.

    Targeted (``label`` is the target): ``max(max_{i != t} z_i - z_t, -kappa)``.
    Untargeted (``label`` is the true class): ``max(z_y - max_{i != y} z_i, -kappa)``.
    """
    z = np.asarray(z, dtype=np.float64)
    gap = np.max(np.delete(z, label)) - z[label]
    return float(max(gap if targeted else -gap, -kappa))


def _margin_loss(z: Tensor, labels: np.ndarray, kappa: float, targeted: bool) -> Tensor:
    """
    Per-example :func:`cw_margin` on the graph: targeted runs drive ``z_t``
    above every other score, untargeted runs drive ``z_y`` below the best
    other score.
    """
    own = ops.pick(z, labels)
    best_other = ops.max(ops.remove_index(z, labels), axis=-1)
    gap = best_other - own if targeted else own - best_other
    return ops.maximum(gap, -kappa)


def _optimise(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    targets: Optional[np.ndarray],
    l1_weight: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    labels = targets if targets is not None else y
    omega = to_omega(x)
    state = AdamState.zeros([omega])
    best = x.copy()
    best_value = np.full(len(x), np.inf)
    best_success = np.zeros(len(x), dtype=bool)
    trace = np.empty(cfg.opt_steps + 1)
    threshold = l1_weight * cfg.opt_lr

    for step in range(cfg.opt_steps + 1):
        graph = Graph()
        w = graph.leaf(omega, requires_grad=True)
        image = 0.5 * (ops.tanh(w) + 1.0)
        diff = image - x
        z = victim_logits(ens, image, cfg.victim)
        per_example = ops.sum(diff * diff, axis=1) + cfg.cw_c * _margin_loss(
            z, labels, cfg.cw_kappa, cfg.targeted
        )
        total = ops.sum(per_example)

        value = per_example.data + l1_weight * np.sum(np.abs(diff.data), axis=1)
        trace[step] = total.item() + l1_weight * float(np.sum(np.abs(diff.data)))
        pred = np.argmax(z.data, axis=1)
        success = pred == targets if targets is not None else pred != y
        better = np.where(
            best_success, success & (value < best_value), success | (value < best_value)
        )
        best[better] = image.data[better]
        best_value[better] = value[better]
        best_success |= success

        if step == cfg.opt_steps:
            break
        grad = graph.backward(total)[w]
        (omega,), state = adam_step([omega], [grad], state, cfg.opt_lr)
        if threshold > 0.0:
            shrunk = x + soft_threshold(tanh_image(omega) - x, threshold)
            omega = to_omega(shrunk)

    return best, best_success, trace


def _run(ens, x, y, cfg: AttackConfig, indices, l1_weight: float) -> AdvBatch:
    x, y, indices = prepare_batch(x, y, indices)
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    adv, success, trace = _optimise(ens, x, y, cfg, targets, l1_weight)
    return AdvBatch(
        originals=x,
        adversarials=adv,
        labels=y,
        targets=targets,
        success=success,
        method=cfg.method,
        victim=cfg.victim_name,
        objective_trace=trace,
    )


def cw(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
) -> AdvBatch:
    """L2 attack with a fixed constant ``c``; returns the best iterate found."""
    return _run(ens, x, y, cfg, indices, 0.0)


def ead(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
) -> AdvBatch:
    """Elastic-net attack; ``ead_beta = 0`` reproduces :func:`cw` exactly."""
    return _run(ens, x, y, cfg, indices, cfg.ead_beta)
