"""Victim outputs and the losses the attacks differentiate."""

from __future__ import annotations

from typing import Optional

import numpy as np

from divens.attacks.config import AttackConfig, AttackLoss
from divens.models.ensemble import Ensemble
from divens.numgrad import Graph, Tensor, ops
from divens.rng import derive_rng

ENSEMBLE_LOGIT_FLOOR = 1e-12


def _check_victim(ens: Ensemble, victim: Optional[int]) -> None:
    if victim is not None and not 0 <= victim < ens.size:
        raise ValueError(f"victim member {victim} out of range for K={ens.size}")


def victim_log_probs(
    ens: Ensemble, x: Tensor, victim: Optional[int] = None
) -> tuple[Tensor, Tensor]:
    """Member log-probabilities ``(n, K', L)`` and the victim's ``ln F(x)``."""
    _check_victim(ens, victim)
    target = ens if victim is None else ens.subset([victim])
    out = target.forward(x)
    if victim is not None:
        return out.log_probs, ops.reshape(out.log_probs, (x.shape[0], ens.num_classes))
    # ln mean_k exp(log p^k), shifted by the per-entry max
    shift = np.max(out.log_probs.data, axis=1)
    summed = ops.sum(ops.exp(out.log_probs - shift[:, None, :]), axis=1)
    return out.log_probs, ops.log(summed) + (shift - np.log(ens.size))


def victim_logits(ens: Ensemble, x: Tensor, victim: Optional[int] = None) -> Tensor:
    """
    Scores whose arg-max is the victim's decision: raw logits for a member,
    ``ln(F_en + 1e-12)`` for the ensemble.
    """
    _check_victim(ens, victim)
    if victim is not None:
        return ens.members[victim].logits(x)
    return ops.log(ens.forward(x).mean_probs + ENSEMBLE_LOGIT_FLOOR)


def victim_probs(ens: Ensemble, x: np.ndarray, victim: Optional[int] = None) -> np.ndarray:
    _check_victim(ens, victim)
    if victim is None:
        return ens.predict(x)
    return ens.members[victim].predict_proba(np.atleast_2d(x))


def victim_predict(ens: Ensemble, x: np.ndarray, victim: Optional[int] = None) -> np.ndarray:
    return np.argmax(victim_probs(ens, x, victim), axis=-1)


def _cross_entropy(
    ens: Ensemble, x: Tensor, labels: np.ndarray, victim: Optional[int], loss: AttackLoss
) -> Tensor:
    """Per-example cross-entropy of the victim against ``labels``."""
    member_log_probs, log_probs = victim_log_probs(ens, x, victim)
    if victim is None and loss == "member_sum":
        return -ops.sum(ops.pick(member_log_probs, labels[:, None]), axis=-1)
    return -ops.pick(log_probs, labels)


def adversarial_loss(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    *,
    victim: Optional[int] = None,
    targeted: bool = False,
    target: Optional[np.ndarray] = None,
    loss: AttackLoss = "ensemble_ce",
) -> tuple[float, np.ndarray]:
    """
    Summed adversarial loss over the batch and its gradient with respect to
    the inputs. Untargeted: cross-entropy against ``y`` (to be ascended).
    Targeted: cross-entropy against ``target`` (to be descended).

    Examples do not interact, so row ``i`` of the gradient is the gradient
    of example ``i``'s own loss.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.intp))
    labels = y
    if targeted:
        if target is None:
            raise ValueError("targeted loss needs a target")
        labels = np.broadcast_to(np.asarray(target, dtype=np.intp), y.shape)
        if np.any(labels == y):
            raise ValueError("target label must differ from the true label")
    if np.any(labels < 0) or np.any(labels >= ens.num_classes):
        raise ValueError(f"labels must lie in [0, {ens.num_classes})")

    graph = Graph()
    xt = graph.leaf(x, requires_grad=True)
    total = ops.sum(_cross_entropy(ens, xt, labels, victim, loss))
    grads = graph.backward(total)
    return total.item(), grads[xt]


def ascent_gradient(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    targets: Optional[np.ndarray],
    cfg: AttackConfig,
) -> np.ndarray:
    """Input gradient of the quantity the attack increases."""
    _, grad = adversarial_loss(
        ens, x, y, victim=cfg.victim, targeted=cfg.targeted, target=targets, loss=cfg.loss
    )
    return -grad if cfg.targeted else grad


def choose_targets(
    y: np.ndarray, num_classes: int, cfg: AttackConfig, indices: np.ndarray
) -> Optional[np.ndarray]:
    """
    Target labels for targeted mode: ``cfg.target_label`` when given, else a
    uniform draw from the wrong labels on stream ``(seed, "target", index)``.
    """
    if not cfg.targeted:
        return None
    if cfg.target_label is not None:
        if not 0 <= cfg.target_label < num_classes:
            raise ValueError(f"target label {cfg.target_label} out of range")
        targets = np.full(len(y), cfg.target_label, dtype=np.intp)
        if np.any(targets == y):
            raise ValueError("target label must differ from the true label")
        return targets
    targets = np.empty(len(y), dtype=np.intp)
    for i, (label, index) in enumerate(zip(y, indices)):
        draw = int(derive_rng(cfg.seed, "target", int(index)).integers(num_classes - 1))
        targets[i] = draw if draw < label else draw + 1
    return targets


def attack_succeeded(
    ens: Ensemble,
    adversarials: np.ndarray,
    y: np.ndarray,
    targets: Optional[np.ndarray],
    victim: Optional[int],
) -> np.ndarray:
    if len(y) == 0:
        return np.zeros(0, dtype=bool)
    pred = victim_predict(ens, adversarials, victim)
    return pred == targets if targets is not None else pred != y
