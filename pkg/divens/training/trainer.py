"""
Simultaneous ensemble training with the ADP objective.

Every member sees the same shuffled mini-batches. The shared objective
``mean[sum_k CE^k - ADP]`` is differentiated once per batch; members still in
the indicator set take an Adam step on their part of the gradient while
frozen members keep contributing predictions as constants.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from divens.dataio.dataset import Dataset
from divens.diversity.measures import adp_objective, batch_log_diversity
from divens.errors import TrainingDivergedError
from divens.models.ensemble import Ensemble
from divens.models.mlp import ModelParams
from divens.numgrad import Graph
from divens.rng import derive_rng
from divens.training.adam import AdamState, adam_step
from divens.training.advt import advt_augment
from divens.training.config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, kw_only=True)
class EpochRecord:
    epoch: int
    objective: float
    member_accuracy: tuple[float, ...]
    ensemble_accuracy: float
    median_log_diversity: float
    validation_loss: tuple[float, ...]
    active: tuple[int, ...]
    advt_fallbacks: int = 0

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "objective": self.objective,
            "member_accuracy": list(self.member_accuracy),
            "ensemble_accuracy": self.ensemble_accuracy,
            "median_log_diversity": self.median_log_diversity,
            "validation_loss": list(self.validation_loss),
            "active": list(self.active),
            "advt_fallbacks": self.advt_fallbacks,
        }


@dataclass(frozen=True, kw_only=True)
class TrainReport:
    """Per-epoch statistics and the history of the indicator set."""

    seed: int
    initial_objective: float
    epochs: tuple[EpochRecord, ...] = ()
    frozen_at: dict[int, int] = field(default_factory=dict)

    @property
    def indicator_history(self) -> list[tuple[int, ...]]:
        return [record.active for record in self.epochs]

    @property
    def final_active(self) -> tuple[int, ...]:
        return self.epochs[-1].active if self.epochs else ()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "initial_objective": self.initial_objective,
            "epochs": [record.to_dict() for record in self.epochs],
            "frozen_at": {str(k): v for k, v in sorted(self.frozen_at.items())},
        }


def _assemble(template: Ensemble, params: list[list[np.ndarray]]) -> Ensemble:
    return Ensemble(
        members=tuple(
            m.with_params(ModelParams.from_arrays(p)) for m, p in zip(template.members, params)
        )
    )


def _member_cross_entropy(ens: Ensemble, data: Dataset, temperature: float) -> np.ndarray:
    """Mean ``-ln F^k_y`` per member."""
    probs = ens.member_probs(data.features, temperature)
    picked = probs[np.arange(len(data)), :, data.labels]
    return -np.mean(np.log(np.maximum(picked, 1e-300)), axis=0)


def _epoch_metrics(ens: Ensemble, data: Dataset) -> tuple[tuple[float, ...], float, float]:
    probs = ens.member_probs(data.features)
    member_acc = tuple(
        float(np.mean(np.argmax(probs[:, k], axis=1) == data.labels)) for k in range(ens.size)
    )
    ensemble_acc = float(np.mean(np.argmax(probs.mean(axis=1), axis=1) == data.labels))
    if ens.size <= ens.num_classes - 1:
        median_led = float(np.median(batch_log_diversity(probs, data.labels)))
    else:
        median_led = float("nan")
    return member_acc, ensemble_acc, median_led


def adp_train(ens: Ensemble, data: Dataset, cfg: TrainConfig) -> tuple[Ensemble, TrainReport]:
    """
    Train all members simultaneously; returns the trained ensemble and the
    report. Deterministic given ``cfg.seed``.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if data.num_classes != ens.num_classes or data.input_dim != ens.input_dim:
        raise ValueError("dataset does not match the ensemble's input size or classes")
    if not isinstance(cfg.learning_rate, float) and len(cfg.learning_rate) != ens.size:
        raise ValueError("need one learning rate per member")

    train, validation = data, None
    if cfg.validation_fraction > 0.0:
        train, validation = data.split_off(cfg.validation_fraction, derive_rng(cfg.seed, "split"))
        if len(validation) == 0:
            validation = None
        if len(train) == 0:
            raise ValueError("validation split leaves no training examples")

    temperature = ens.members[0].config.temperature
    params = [list(m.params.arrays) for m in ens.members]
    states = [AdamState.zeros(p) for p in params]
    active = list(range(ens.size))
    best = np.full(ens.size, np.inf)
    stale = np.zeros(ens.size, dtype=int)
    frozen_at: dict[int, int] = {}
    records: list[EpochRecord] = []
    initial_objective: Optional[float] = None
    current = ens

    for epoch in range(1, cfg.epochs + 1):
        order = derive_rng(cfg.seed, "shuffle", epoch).permutation(len(train))
        objectives = []
        fallbacks = 0
        for batch_index, start in enumerate(range(0, len(train), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            xb, yb = train.features[idx], train.labels[idx]
            if cfg.advt is not None:
                augmented = advt_augment(
                    current, xb, yb, cfg.advt, derive_rng(cfg.seed, "advt", epoch, batch_index), idx
                )
                xb, yb = augmented.features, augmented.labels
                fallbacks += augmented.fallbacks

            graph = Graph()
            bound = [m.bind(graph, requires_grad=k in active) for k, m in enumerate(current.members)]
            loss = adp_objective(current, xb, yb, cfg.adp, bound=bound, temperature=temperature)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(epoch=epoch, batch_index=batch_index, value=value)
            if initial_objective is None:
                initial_objective = value
            objectives.append(value)

            grads = graph.backward(loss)
            for k in active:
                member_grads = [grads[t] for t in bound[k].tensors]
                new_params, states[k] = adam_step(params[k], member_grads, states[k], cfg.rate(k))
                params[k] = list(new_params)
            current = _assemble(ens, params)

        val_loss: tuple[float, ...] = ()
        if validation is not None:
            losses = _member_cross_entropy(current, validation, temperature)
            val_loss = tuple(float(v) for v in losses)
            for k in list(active):
                if losses[k] < best[k] - cfg.freeze_tolerance:
                    best[k] = losses[k]
                    stale[k] = 0
                else:
                    stale[k] += 1
                if stale[k] >= cfg.freeze_patience:
                    active.remove(k)
                    frozen_at[k] = epoch
                    logger.info("member %d converged at epoch %d; frozen", k, epoch)

        member_acc, ensemble_acc, median_led = _epoch_metrics(current, train)
        record = EpochRecord(
            epoch=epoch,
            objective=float(np.mean(objectives)),
            member_accuracy=member_acc,
            ensemble_accuracy=ensemble_acc,
            median_log_diversity=median_led,
            validation_loss=val_loss,
            active=tuple(active),
            advt_fallbacks=fallbacks,
        )
        records.append(record)
        logger.info(
            "epoch %d: objective %.6f, ensemble accuracy %.4f, median ln ED %.4f, active %s",
            epoch, record.objective, ensemble_acc, median_led, list(active),
        )
        if not active:
            break

    report = TrainReport(
        seed=cfg.seed,
        initial_objective=float(initial_objective),
        epochs=tuple(records),
        frozen_at=frozen_at,
    )
    return current, report
