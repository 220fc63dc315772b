"""
Ensemble diversity as an adversarial-example detector.

No label is available at test time, so the non-maximal matrix drops the
ensemble's own prediction ``argmax F_en``. Low diversity flags an input as
adversarial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from divens.diversity.measures import batch_log_diversity
from divens.models.ensemble import Ensemble, argmax_lowest


@dataclass(frozen=True, kw_only=True, eq=False)
class RocCurve:
    """Threshold sweep with the adversarial class as positive."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr})


def detection_scores(ens: Ensemble, x: np.ndarray, det_offset: float = 1e-12) -> np.ndarray:
    """Ensemble diversity of each input of the batch ``x``."""
    member_probs = ens.member_probs(x)
    predicted = argmax_lowest(np.mean(member_probs, axis=1))
    return np.exp(batch_log_diversity(member_probs, predicted, det_offset))


def detection_score(ens: Ensemble, x: np.ndarray, det_offset: float = 1e-12) -> float:
    return float(detection_scores(ens, np.atleast_2d(x), det_offset)[0])


def roc_auc(clean_scores: np.ndarray, adv_scores: np.ndarray) -> RocCurve:
    """
    Sweep thresholds over every observed score plus both infinities; an
    input is flagged when its score is strictly below the threshold. The
    area is the trapezoid rule over the (fpr, tpr) points, so tied clean and
    adversarial scores count one half.
    """
    clean = np.asarray(clean_scores, dtype=np.float64).ravel()
    adv = np.asarray(adv_scores, dtype=np.float64).ravel()
    if clean.size == 0 or adv.size == 0:
        raise ValueError("roc_auc needs at least one clean and one adversarial score")
    if not (np.all(np.isfinite(clean)) and np.all(np.isfinite(adv))):
        raise ValueError("scores must be finite")

    thresholds = np.concatenate(([-np.inf], np.unique(np.concatenate((clean, adv))), [np.inf]))
    clean_sorted = np.sort(clean)
    adv_sorted = np.sort(adv)
    fpr = np.searchsorted(clean_sorted, thresholds, side="left") / clean.size
    tpr = np.searchsorted(adv_sorted, thresholds, side="left") / adv.size
    # the last threshold is +inf, which flags everything
    fpr[-1] = tpr[-1] = 1.0
    return RocCurve(thresholds=thresholds, tpr=tpr, fpr=fpr, auc=float(trapezoid(tpr, fpr)))
