"""Simultaneous ADP training, Adam and adversarial-training augmentation."""

from .adam import AdamState, adam_step
from .advt import AugmentedBatch, advt_augment
from .config import AdvTConfig, TrainConfig
from .trainer import EpochRecord, TrainReport, adp_train

__all__ = [
    "AdamState",
    "adam_step",
    "AdvTConfig",
    "TrainConfig",
    "AugmentedBatch",
    "advt_augment",
    "EpochRecord",
    "TrainReport",
    "adp_train",
]
