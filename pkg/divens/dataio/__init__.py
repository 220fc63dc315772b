"""Datasets, IDX parsing, checkpoints and experiment configuration."""

from .checkpoint import (
    FORMAT_VERSION,
    Checkpoint,
    load_checkpoint,
    report_digest,
    save_checkpoint,
)
from .config import (
    DatasetSpec,
    EvalConfig,
    ExperimentConfig,
    ModelSpec,
    load_desk_dataset,
)
from .dataset import Dataset
from .idx import load_idx, read_idx_images, read_idx_labels
from .synthetic import synth_blobs

__all__ = [
    "Dataset",
    "load_idx",
    "read_idx_images",
    "read_idx_labels",
    "synth_blobs",
    "FORMAT_VERSION",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "report_digest",
    "DatasetSpec",
    "ModelSpec",
    "EvalConfig",
    "ExperimentConfig",
    "load_desk_dataset",
]
