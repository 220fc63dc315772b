"""Ensemble diversity, the ADP regularizer and the prediction-space solvers."""

from .measures import (
    AdpConfig,
    NonMaxMatrix,
    PredictionSet,
    adp_objective,
    adp_regularizer,
    adp_term,
    batch_log_diversity,
    ensemble_diversity,
    entropy,
    jsd_diversity,
    log_diversity,
    nonmax_columns,
    nonmax_matrix,
    prediction_objective,
    shannon_entropy,
)
from .simplex import project_to_simplex
from .theory import (
    JsdConfig,
    PredictionTrace,
    TheoryCheck,
    default_partition,
    optimize_prediction_space,
    partition_solution,
    run_theory_suite,
    smoothing_residual,
    solve_alpha,
    solve_ensemble_confidence,
)

__all__ = [
    "AdpConfig",
    "PredictionSet",
    "NonMaxMatrix",
    "shannon_entropy",
    "nonmax_matrix",
    "ensemble_diversity",
    "adp_regularizer",
    "adp_objective",
    "prediction_objective",
    "jsd_diversity",
    "entropy",
    "nonmax_columns",
    "log_diversity",
    "adp_term",
    "batch_log_diversity",
    "project_to_simplex",
    "JsdConfig",
    "PredictionTrace",
    "TheoryCheck",
    "solve_alpha",
    "solve_ensemble_confidence",
    "smoothing_residual",
    "default_partition",
    "partition_solution",
    "optimize_prediction_space",
    "run_theory_suite",
]
