from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, get_args

import numpy as np
import pandas as pd

AttackMethod = Literal["fgsm", "bim", "pgd", "mim", "jsma", "cw", "ead"]
AttackLoss = Literal["ensemble_ce", "member_sum"]

ATTACK_METHODS: tuple[str, ...] = get_args(AttackMethod)
BALL_METHODS = ("fgsm", "bim", "pgd", "mim")


@dataclass(frozen=True, kw_only=True)
class AttackConfig:
    """
    Parameters of one adversarial attack.

    ``victim`` is ``None`` for the whole ensemble or a member index. ``loss``
    selects the white-box loss against an ensemble victim: the cross-entropy
    of the averaged prediction or the sum of member cross-entropies.
    """

    method: AttackMethod = "pgd"
    eps: float = 0.1
    steps: int = 10
    step_size: Optional[float] = None
    random_init: bool = True
    momentum_decay: float = 1.0
    jsma_theta: float = 0.2
    jsma_gamma: float = 0.1
    cw_c: float = 1.0
    cw_kappa: float = 0.0
    ead_beta: float = 0.01
    opt_lr: float = 0.01
    opt_steps: int = 1000
    targeted: bool = False
    target_label: Optional[int] = None
    victim: Optional[int] = None
    loss: AttackLoss = "ensemble_ce"
    seed: int = 0

    def __post_init__(self):
        if self.method not in ATTACK_METHODS:
            raise ValueError(f"'method' must be one of {ATTACK_METHODS}, got {self.method!r}")
        if self.loss not in get_args(AttackLoss):
            raise ValueError(f"'loss' must be one of {get_args(AttackLoss)}")
        if self.eps < 0:
            raise ValueError("'eps' must be non-negative")
        if self.steps < 1:
            raise ValueError("'steps' must be at least 1")
        if self.step_size is not None and self.step_size < 0:
            raise ValueError("'step_size' must be non-negative")
        if self.momentum_decay < 0:
            raise ValueError("'momentum_decay' must be non-negative")
        if not 0.0 < self.jsma_gamma <= 1.0:
            raise ValueError("'jsma_gamma' must lie in (0, 1]")
        if self.cw_kappa < 0:
            raise ValueError("'cw_kappa' must be non-negative")
        if self.method in ("cw", "ead") and not self.cw_c > 0:
            raise ValueError("'cw_c' must be positive")
        if self.ead_beta < 0:
            raise ValueError("'ead_beta' must be non-negative")
        if not self.opt_lr > 0:
            raise ValueError("'opt_lr' must be positive")
        if self.opt_steps < 1:
            raise ValueError("'opt_steps' must be at least 1")
        if self.target_label is not None and not self.targeted:
            raise ValueError("'target_label' requires 'targeted'")
        if self.victim is not None and self.victim < 0:
            raise ValueError("'victim' must be a member index or None")

    @property
    def alpha(self) -> float:
        """Per-iteration step of the gradient-sign attacks."""
        return self.eps / self.steps if self.step_size is None else self.step_size

    @property
    def victim_name(self) -> str:
        return "ensemble" if self.victim is None else f"member{self.victim}"

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "eps": self.eps,
            "steps": self.steps,
            "step_size": self.step_size,
            "random_init": self.random_init,
            "momentum_decay": self.momentum_decay,
            "jsma_theta": self.jsma_theta,
            "jsma_gamma": self.jsma_gamma,
            "cw_c": self.cw_c,
            "cw_kappa": self.cw_kappa,
            "ead_beta": self.ead_beta,
            "opt_lr": self.opt_lr,
            "opt_steps": self.opt_steps,
            "targeted": self.targeted,
            "target_label": self.target_label,
            "victim": self.victim,
            "loss": self.loss,
            "seed": self.seed,
        }


@dataclass(frozen=True, kw_only=True, eq=False)
class AdvBatch:
    """Adversarial counterparts of a batch together with per-example outcomes."""

    originals: np.ndarray
    adversarials: np.ndarray
    labels: np.ndarray
    targets: Optional[np.ndarray]
    success: np.ndarray
    method: str
    victim: str
    objective_trace: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def delta(self) -> np.ndarray:
        return self.adversarials - self.originals

    @property
    def linf(self) -> np.ndarray:
        return np.max(np.abs(self.delta), axis=1) if self.delta.size else np.zeros(len(self))

    @property
    def l2(self) -> np.ndarray:
        return np.sqrt(np.sum(self.delta**2, axis=1))

    @property
    def l1(self) -> np.ndarray:
        return np.sum(np.abs(self.delta), axis=1)

    @property
    def l0(self) -> np.ndarray:
        return np.count_nonzero(self.delta, axis=1)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success)) if len(self) else 0.0

    @property
    def mean_l0(self) -> float:
        return float(np.mean(self.l0)) if len(self) else 0.0

    @property
    def mean_l1(self) -> float:
        return float(np.mean(self.l1)) if len(self) else 0.0

    @property
    def mean_l2(self) -> float:
        return float(np.mean(self.l2)) if len(self) else 0.0

    @property
    def mean_linf(self) -> float:
        return float(np.mean(self.linf)) if len(self) else 0.0

    def to_frame(self) -> pd.DataFrame:
        """One row per example with its outcome and distortion."""
        targets = self.targets if self.targets is not None else np.full(len(self), -1)
        return pd.DataFrame(
            {
                "index": np.arange(len(self)),
                "label": self.labels,
                "target": targets,
                "success": self.success.astype(bool),
                "l0": self.l0,
                "l1": self.l1,
                "l2": self.l2,
                "linf": self.linf,
            }
        )
