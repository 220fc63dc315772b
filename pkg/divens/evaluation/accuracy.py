"""
Clean and adversarial accuracy of an ensemble and its members.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import pandas as pd

from divens.attacks.config import BALL_METHODS, AttackConfig
from divens.attacks.registry import run_attack
from divens.dataio.dataset import Dataset
from divens.models.ensemble import Ensemble, argmax_lowest

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class AccuracyReport:
    ensemble: float
    members: tuple[float, ...]
    count: int

    def to_dict(self) -> dict:
        return {"ensemble": self.ensemble, "members": list(self.members), "count": self.count}


def _require_examples(data: Dataset) -> None:
    if len(data) == 0:
        raise ValueError(f"dataset '{data.name}' ({data.split}) is empty")


def _correct(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(argmax_lowest(probs) == labels))


def accuracy_report(ens: Ensemble, data: Dataset) -> AccuracyReport:
    """Ensemble accuracy under ``argmax F_en`` plus one accuracy per member."""
    _require_examples(data)
    member_probs = ens.member_probs(data.features)
    return AccuracyReport(
        ensemble=_correct(np.mean(member_probs, axis=1), data.labels),
        members=tuple(_correct(member_probs[:, k], data.labels) for k in range(ens.size)),
        count=len(data),
    )


def accuracy(ens: Ensemble, data: Dataset) -> float:
    return accuracy_report(ens, data).ensemble


def robust_accuracy_report(ens: Ensemble, data: Dataset, attack: AttackConfig) -> AccuracyReport:
    """
    Accuracies on inputs crafted by ``attack`` against its configured victim.
    Example ``i`` of ``data`` uses ``i`` as its random-stream index.
    """
    _require_examples(data)
    batch = run_attack(ens, data.features, data.labels, attack, indices=np.arange(len(data)))
    report = accuracy_report(ens, replace(data, features=batch.adversarials))
    logger.info(
        "robust accuracy %.4f under %s eps=%g against %s",
        report.ensemble, attack.method, attack.eps, attack.victim_name,
    )
    return report


def robust_accuracy(ens: Ensemble, data: Dataset, attack: AttackConfig) -> float:
    return robust_accuracy_report(ens, data, attack).ensemble


def robustness_sweep(
    ens: Ensemble, data: Dataset, attack: AttackConfig, eps_values: Sequence[float]
) -> pd.DataFrame:
    """Robust accuracy for each budget in ``eps_values``, one row per budget."""
    if attack.method not in BALL_METHODS:
        raise ValueError(f"an eps sweep needs an L-infinity attack, not {attack.method!r}")
    rows = []
    for eps in eps_values:
        value = robust_accuracy(ens, data, replace(attack, eps=float(eps)))
        rows.append({"method": attack.method, "eps": float(eps), "accuracy": value})
    return pd.DataFrame(rows, columns=["method", "eps", "accuracy"])
