from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from divens.attacks.config import AttackConfig
from divens.attacks.gradient_sign import fgsm, pgd
from divens.errors import NumericError
from divens.models.ensemble import Ensemble
from divens.training.config import AdvTConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True, eq=False)
class AugmentedBatch:
    features: np.ndarray  # (2n, d): originals then adversarial counterparts
    labels: np.ndarray
    eps: np.ndarray  # per-example budgets of the crafted half
    fallbacks: int

    def __len__(self) -> int:
        return len(self.labels)


def advt_augment(
    ens: Ensemble,
    x: np.ndarray,
    y: np.ndarray,
    cfg: AdvTConfig,
    rng: np.random.Generator,
    indices: Optional[np.ndarray] = None,
) -> AugmentedBatch:
    """
    Originals followed by adversarial counterparts crafted against the
    current ensemble, one budget ``eps ~ U[lo, hi]`` per example. Rows the
    attack fails on (non-finite or outside the ball) fall back to the clean
    example and are counted.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.intp)
    lo, hi = cfg.eps_range
    eps = rng.uniform(lo, hi, size=len(y)) if hi > lo else np.full(len(y), lo)
    attack_cfg = AttackConfig(
        method=cfg.attack,
        eps=hi,
        steps=1 if cfg.attack == "fgsm" else cfg.steps,
        seed=int(rng.integers(2**62)),
    )
    attack = fgsm if cfg.attack == "fgsm" else pgd
    try:
        crafted = attack(ens, x, y, attack_cfg, indices=indices, eps=eps).adversarials
        failed = ~np.all(np.isfinite(crafted), axis=1)
        failed |= np.max(np.abs(crafted - x), axis=1) > eps + 1e-9
    except (NumericError, FloatingPointError) as exc:
        logger.warning("adversarial batch failed (%s); using clean examples", exc)
        crafted = x.copy()
        failed = np.ones(len(y), dtype=bool)
    crafted = np.where(failed[:, None], x, crafted)
    fallbacks = int(np.count_nonzero(failed))
    if fallbacks:
        logger.warning("%d adversarial examples fell back to clean inputs", fallbacks)
    return AugmentedBatch(
        features=np.concatenate([x, crafted]),
        labels=np.concatenate([y, y]),
        eps=eps,
        fallbacks=fallbacks,
    )
