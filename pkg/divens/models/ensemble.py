from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from divens.errors import ShapeError
from divens.models.mlp import BoundParams, Mlp, MlpConfig
from divens.numgrad import Graph, Tensor, ops
from divens.rng import derive_rng


@dataclass(frozen=True, kw_only=True)
class EnsembleOutput:
    """Graph-level outputs of all members on one batch."""

    logits: tuple[Tensor, ...]
    log_probs: Tensor  # (n, K, L)
    probs: Tensor  # (n, K, L)

    @property
    def mean_probs(self) -> Tensor:
        """``F_en`` of shape ``(n, L)``."""
        return ops.mean(self.probs, axis=1)


@dataclass(frozen=True, kw_only=True, eq=False)
class Ensemble:
    """
    K independently parameterised members over the same inputs and labels.

    The ensemble prediction is the plain average of member probability
    vectors. Instances are immutable; training returns new ensembles.
    """

    members: tuple[Mlp, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if len(self.members) == 0:
            raise ValueError("an ensemble needs at least one member")
        first = self.members[0]
        for k, m in enumerate(self.members[1:], start=1):
            if m.input_dim != first.input_dim:
                raise ValueError(f"member {k} disagrees on 'input_dim'")
            if m.num_classes != first.num_classes:
                raise ValueError(f"member {k} disagrees on 'num_classes'")
        arrays = [a for m in self.members for a in m.params.arrays]
        if len({id(a) for a in arrays}) != len(arrays):
            raise ValueError("ensemble members must not share parameter storage")

    @classmethod
    def initialize(cls, config: MlpConfig, size: int, seed: int) -> Ensemble:
        """Members initialised from distinct streams ``(seed, "init", k)``."""
        if size < 1:
            raise ValueError("ensemble size must be at least 1")
        return cls(
            members=tuple(
                Mlp.initialize(config, derive_rng(seed, "init", k)) for k in range(size)
            )
        )

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def num_classes(self) -> int:
        return self.members[0].num_classes

    @property
    def input_dim(self) -> int:
        return self.members[0].input_dim

    def with_member(self, k: int, member: Mlp) -> Ensemble:
        members = list(self.members)
        members[k] = member
        return replace(self, members=tuple(members))

    def subset(self, indices: Sequence[int]) -> Ensemble:
        return replace(self, members=tuple(self.members[k] for k in indices))

    # ---------- graph-level ----------
    def forward(
        self,
        x: Tensor,
        bound: Optional[Sequence[Optional[BoundParams]]] = None,
        temperature: float = 1.0,
    ) -> EnsembleOutput:
        """Member logits, log-probabilities and probabilities for batch ``x``."""
        if bound is None:
            bound = [None] * self.size
        logits = tuple(m.logits(x, b) for m, b in zip(self.members, bound))
        scaled = [z / temperature if temperature != 1.0 else z for z in logits]
        log_probs = ops.stack([ops.log_softmax(z) for z in scaled], axis=1)
        probs = ops.stack([ops.softmax(z) for z in scaled], axis=1)
        return EnsembleOutput(logits=logits, log_probs=log_probs, probs=probs)

    # ---------- numpy-level ----------
    def member_probs(self, x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
        """All member predictions, shape ``(n, K, L)``."""
        x = self._check_input(x)
        return np.stack([m.predict_proba(x, temperature) for m in self.members], axis=1)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """``F_en`` for a batch, shape ``(n, L)``."""
        return np.mean(self.member_probs(x), axis=1)

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError("ensemble", x.shape, (x.shape[0], self.input_dim))
        if not np.all(np.isfinite(x)):
            raise ValueError("inputs must be finite")
        return x


def predict_member(
    ens: Ensemble, member: int, x: np.ndarray, temperature: float = 1.0
) -> np.ndarray:
    """``F^k(x) = softmax(z^k(x) / T)``; a single input gives a single vector."""
    if not 0 <= member < ens.size:
        raise IndexError(f"member {member} out of range for K={ens.size}")
    x_arr = np.asarray(x, dtype=np.float64)
    probs = ens.members[member].predict_proba(ens._check_input(x_arr), temperature)
    return probs[0] if x_arr.ndim == 1 else probs


def predict_ensemble(ens: Ensemble, x: np.ndarray) -> np.ndarray:
    """``F_en = (1/K) sum_k F^k``; a single input gives a single vector."""
    x_arr = np.asarray(x, dtype=np.float64)
    probs = ens.predict(x_arr)
    return probs[0] if x_arr.ndim == 1 else probs


def argmax_lowest(probs: np.ndarray) -> np.ndarray:
    """Arg-max over the last axis; ties go to the lowest class index."""
    return np.argmax(probs, axis=-1)
