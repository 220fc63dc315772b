from __future__ import annotations

import math
from typing import Optional

import numpy as np

from divens.attacks.config import AdvBatch, AttackConfig
from divens.attacks.gradient_sign import prepare_batch
from divens.attacks.loss import attack_succeeded, choose_targets, victim_probs
from divens.models.ensemble import Ensemble
from divens.numgrad import Graph, ops

SATURATED = 1.0 - 1e-12


def saliency_map(target_grad: np.ndarray, others_grad: np.ndarray) -> np.ndarray:
    """
    ``S[i] = dF_t/dx_i * |sum_{j != t} dF_j/dx_i|``, zero wherever the target
    derivative is negative or the others' derivative is positive.
    """
    target_grad = np.asarray(target_grad, dtype=np.float64)
    others_grad = np.asarray(others_grad, dtype=np.float64)
    keep = (target_grad >= 0.0) & (others_grad <= 0.0)
    return np.where(keep, target_grad * np.abs(others_grad), 0.0)


def _probability_gradients(
    ens: Ensemble, x: np.ndarray, goal: np.ndarray, victim: Optional[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Input gradients of ``F_goal`` and of ``sum_{j != goal} F_j``, per example."""
    grads = []
    for pick_goal in (True, False):
        graph = Graph()
        xt = graph.leaf(x, requires_grad=True)
        if victim is None:
            probs = ens.forward(xt).mean_probs
        else:
            probs = ops.softmax(ens.members[victim].logits(xt))
        goal_prob = ops.pick(probs, goal)
        value = goal_prob if pick_goal else ops.sum(probs, axis=-1) - goal_prob
        grads.append(graph.backward(ops.sum(value))[xt])
    return grads[0], grads[1]


def jsma(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
) -> AdvBatch:
    """
    Greedy saliency attack: each round modifies the most salient unmodified,
    unsaturated feature by ``jsma_theta`` toward the goal class. Untargeted runs push the
    runner-up class of the clean prediction. An example stops once it
    succeeds, when ``ceil(gamma * d)`` features have been changed, or when no
    feature has positive saliency.
    """
    x, y, indices = prepare_batch(x, y, indices)
    targets = choose_targets(y, ens.num_classes, cfg, indices)
    if targets is not None:
        goal = targets
    else:
        probs = victim_probs(ens, x, cfg.victim) if len(x) else np.zeros((0, ens.num_classes))
        masked = probs.copy()
        masked[np.arange(len(y)), y] = -np.inf
        goal = np.argmax(masked, axis=1)

    budget = math.ceil(cfg.jsma_gamma * x.shape[1])
    adv = x.copy()
    modified = np.zeros(x.shape, dtype=bool)
    active = ~attack_succeeded(ens, adv, y, targets, cfg.victim)
    for _ in range(budget):
        if not np.any(active):
            break
        rows = np.flatnonzero(active)
        target_grad, others_grad = _probability_gradients(ens, adv[rows], goal[rows], cfg.victim)
        saliency = saliency_map(target_grad, others_grad)
        saliency[modified[rows] | (adv[rows] >= SATURATED)] = 0.0
        best = np.argmax(saliency, axis=1)
        stuck = saliency[np.arange(len(rows)), best] <= 0.0
        moving = rows[~stuck]
        feature = best[~stuck]
        adv[moving, feature] = np.clip(adv[moving, feature] + cfg.jsma_theta, 0.0, 1.0)
        modified[moving, feature] = True
        active[rows[stuck]] = False
        active[moving] = ~attack_succeeded(
            ens, adv[moving], y[moving], None if targets is None else targets[moving], cfg.victim
        )

    return AdvBatch(
        originals=x,
        adversarials=adv,
        labels=y,
        targets=targets,
        success=attack_succeeded(ens, adv, y, targets, cfg.victim),
        method=cfg.method,
        victim=cfg.victim_name,
    )
