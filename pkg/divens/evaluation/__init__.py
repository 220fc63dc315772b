"""Robustness, transferability and detection measurements."""

from .accuracy import (
    AccuracyReport,
    accuracy,
    accuracy_report,
    robust_accuracy,
    robust_accuracy_report,
    robustness_sweep,
)
from .detection import RocCurve, detection_score, detection_scores, roc_auc
from .histogram import DiversityHistogram, diversity_histogram
from .transfer import TransferMatrix, TransferMode, transfer_matrix

__all__ = [
    "AccuracyReport",
    "accuracy",
    "accuracy_report",
    "robust_accuracy",
    "robust_accuracy_report",
    "robustness_sweep",
    "TransferMatrix",
    "TransferMode",
    "transfer_matrix",
    "RocCurve",
    "detection_score",
    "detection_scores",
    "roc_auc",
    "DiversityHistogram",
    "diversity_histogram",
]
