"""
Transferability of adversarial examples between ensemble members.

Row ``i`` holds the examples crafted with member ``i`` as the substitute
model; column ``j`` is the member they are evaluated on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Literal, get_args

import numpy as np
import pandas as pd

from divens.attacks.config import AttackConfig
from divens.attacks.registry import run_attack
from divens.dataio.dataset import Dataset
from divens.models.ensemble import Ensemble, argmax_lowest

logger = logging.getLogger(__name__)

TransferMode = Literal["untargeted_accuracy", "targeted_success_rate"]


@dataclass(frozen=True, kw_only=True, eq=False)
class TransferMatrix:
    values: np.ndarray  # (K, K)
    mode: TransferMode
    attack: AttackConfig

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("'values' must be a square matrix")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("'values' must lie in [0, 1]")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def to_frame(self) -> pd.DataFrame:
        names = [f"member{k}" for k in range(self.size)]
        frame = pd.DataFrame(self.values, index=names, columns=names)
        frame.index.name = "substitute"
        return frame


def transfer_matrix(
    ens: Ensemble, data: Dataset, attack: AttackConfig, mode: TransferMode
) -> TransferMatrix:
    if mode not in get_args(TransferMode):
        raise ValueError(f"'mode' must be one of {get_args(TransferMode)}")
    if ens.size < 2:
        raise ValueError("a transfer matrix needs at least two members")
    if len(data) == 0:
        raise ValueError(f"dataset '{data.name}' ({data.split}) is empty")

    targeted = mode == "targeted_success_rate"
    indices = np.arange(len(data))
    values = np.zeros((ens.size, ens.size))
    for i in range(ens.size):
        cfg = replace(attack, victim=i, targeted=targeted, target_label=None)
        batch = run_attack(ens, data.features, data.labels, cfg, indices=indices)
        member_probs = ens.member_probs(batch.adversarials)
        for j in range(ens.size):
            predicted = argmax_lowest(member_probs[:, j])
            reference = batch.targets if targeted else data.labels
            values[i, j] = float(np.mean(predicted == reference))
    logger.info("%s transfer matrix for %s eps=%g over %d examples",
                mode, attack.method, attack.eps, len(data))
    return TransferMatrix(values=values, mode=mode, attack=attack)
