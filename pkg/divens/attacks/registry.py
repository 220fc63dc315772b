from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from divens.attacks.config import BALL_METHODS, AdvBatch, AttackConfig
from divens.attacks.gradient_sign import Budget, bim, fgsm, mim, pgd
from divens.attacks.optimization import cw, ead
from divens.attacks.saliency import jsma
from divens.models.ensemble import Ensemble

logger = logging.getLogger(__name__)

AttackFn = Callable[..., AdvBatch]

ATTACKS: dict[str, AttackFn] = {
    "fgsm": fgsm,
    "bim": bim,
    "pgd": pgd,
    "mim": mim,
    "jsma": jsma,
    "cw": cw,
    "ead": ead,
}


def run_attack(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AttackConfig,
    *,
    indices: Optional[np.ndarray] = None,
    eps: Optional[Budget] = None,
) -> AdvBatch:
    """
    Dispatch on ``cfg.method``. ``indices`` are the examples' positions in
    the full dataset and key every per-example random stream; ``eps`` may
    override the budget of the L-infinity attacks, per example if needed.
    """
    if cfg.victim is not None and cfg.victim >= ens.size:
        raise ValueError(f"victim member {cfg.victim} out of range for K={ens.size}")
    attack = ATTACKS[cfg.method]
    if cfg.method in BALL_METHODS:
        batch = attack(ens, x, y, cfg, indices=indices, eps=eps)
    else:
        if eps is not None:
            raise ValueError(f"{cfg.method} does not take an L-infinity budget")
        batch = attack(ens, x, y, cfg, indices=indices)
    logger.debug(
        "%s against %s: %d examples, success rate %.4f",
        cfg.method, cfg.victim_name, len(batch), batch.success_rate,
    )
    return batch
