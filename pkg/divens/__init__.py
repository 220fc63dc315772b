"""divens public API."""

from .attacks import ATTACKS, AdvBatch, AttackConfig, run_attack
from .dataio import (
    Checkpoint,
    Dataset,
    ExperimentConfig,
    load_checkpoint,
    load_desk_dataset,
    load_idx,
    save_checkpoint,
    synth_blobs,
)
from .diversity import (
    AdpConfig,
    PredictionSet,
    adp_regularizer,
    ensemble_diversity,
    nonmax_matrix,
    run_theory_suite,
)
from .errors import DivensError
from .evaluation import (
    accuracy,
    detection_score,
    diversity_histogram,
    robust_accuracy,
    roc_auc,
    transfer_matrix,
)
from .models import Ensemble, Mlp, MlpConfig
from .training import TrainConfig, adp_train

__all__ = [
    "DivensError",
    "MlpConfig",
    "Mlp",
    "Ensemble",
    "AdpConfig",
    "PredictionSet",
    "nonmax_matrix",
    "ensemble_diversity",
    "adp_regularizer",
    "run_theory_suite",
    "TrainConfig",
    "adp_train",
    "AttackConfig",
    "AdvBatch",
    "ATTACKS",
    "run_attack",
    "accuracy",
    "robust_accuracy",
    "transfer_matrix",
    "detection_score",
    "roc_auc",
    "diversity_histogram",
    "Dataset",
    "load_idx",
    "synth_blobs",
    "load_desk_dataset",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "ExperimentConfig",
]
