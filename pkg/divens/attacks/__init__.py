"""Adversarial attacks against ensembles and their members."""

from .config import ATTACK_METHODS, AdvBatch, AttackConfig
from .gradient_sign import bim, clip_ball, fgsm, mim, pgd, pgd_start
from .loss import adversarial_loss, victim_predict, victim_probs
from .optimization import cw, cw_margin, ead, soft_threshold, tanh_image
from .registry import ATTACKS, run_attack
from .saliency import jsma, saliency_map

__all__ = [
    "ATTACK_METHODS",
    "ATTACKS",
    "AttackConfig",
    "AdvBatch",
    "adversarial_loss",
    "victim_probs",
    "victim_predict",
    "clip_ball",
    "fgsm",
    "bim",
    "pgd",
    "pgd_start",
    "mim",
    "jsma",
    "saliency_map",
    "cw",
    "ead",
    "cw_margin",
    "soft_threshold",
    "tanh_image",
    "run_attack",
]
