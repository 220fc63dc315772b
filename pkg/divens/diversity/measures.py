"""
Ensemble diversity and the adaptive diversity promoting (ADP) regularizer.

The graph-level functions (``entropy``, ``nonmax_columns``, ``log_diversity``,
``adp_term``, ``adp_objective``) operate on batched tensors and are what the
trainer differentiates. The :class:`PredictionSet`-level functions wrap them
for a single input with numpy in and floats out.

Layout note: the non-maximal matrix of the text is ``(L-1) x K`` with one
column per member. Tensors here keep one *row* per member, i.e. they hold its
transpose, so the Gram matrix is ``C @ C.T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from divens.errors import ShapeError
from divens.models.ensemble import Ensemble
from divens.models.mlp import BoundParams
from divens.numgrad import Graph, Tensor, evaluate, ops

SIMPLEX_TOLERANCE = 1e-9
ZERO_COLUMN_NORM = 1e-12


@dataclass(frozen=True, kw_only=True)
class AdpConfig:
    """Coefficients of ``ADP = alpha * H(F_en) + beta * ln(ED)``."""

    alpha: float = 2.0
    beta: float = 0.5
    det_offset: float = 1e-12

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("'alpha' must be non-negative")
        if self.beta < 0:
            raise ValueError("'beta' must be non-negative")
        if not 0.0 < self.det_offset <= 1e-6:
            raise ValueError("'det_offset' must lie in (0, 1e-6]")

    @property
    def is_baseline(self) -> bool:
        """True for plain ensemble cross-entropy training."""
        return self.alpha == 0.0 and self.beta == 0.0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "det_offset": self.det_offset}


@dataclass(frozen=True, kw_only=True, eq=False)
class PredictionSet:
    """The K member probability vectors for one input with true label ``y``."""

    probs: np.ndarray  # (K, L)
    y: int

    def __post_init__(self):
        probs = np.atleast_2d(np.array(self.probs, dtype=np.float64))
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "y", int(self.y))
        if probs.ndim != 2:
            raise ValueError("'probs' must have shape (K, L)")
        if np.any(probs < -SIMPLEX_TOLERANCE) or np.any(probs > 1.0 + SIMPLEX_TOLERANCE):
            raise ValueError("prediction entries must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > SIMPLEX_TOLERANCE):
            raise ValueError("each prediction must sum to 1")
        if not 0 <= self.y < probs.shape[1]:
            raise ValueError(f"label {self.y} out of range for L={probs.shape[1]}")

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    @property
    def ensemble_prediction(self) -> np.ndarray:
        return np.mean(self.probs, axis=0)


@dataclass(frozen=True, kw_only=True, eq=False)
class NonMaxMatrix:
    """``(L-1) x K`` matrix of L2-normalised non-maximal predictions."""

    matrix: np.ndarray
    y: int

    @property
    def columns(self) -> np.ndarray:
        return self.matrix.T


# ---------- graph-level ----------
def entropy(p: Tensor) -> Tensor:
    """Shannon entropy (natural log) over the last axis."""
    return -ops.sum(ops.xlogx(p), axis=-1)


def nonmax_columns(probs: Tensor, y: np.ndarray) -> Tensor:
    """
    Drop entry ``y`` from every member vector and L2-normalise what is left.

    ``probs`` has shape ``(..., K, L)`` and ``y`` the leading shape ``(...)``.
    A member whose remaining entries are all (numerically) zero is replaced
    by the uniform direction before normalisation.
    """
    num_classes = probs.shape[-1]
    if num_classes < 2:
        raise ShapeError("nonmax_columns", probs.shape, reason="needs L >= 2")
    y = np.asarray(y, dtype=np.intp)
    rest = ops.remove_index(probs, y[..., None])
    zero = np.sqrt(np.sum(rest.data * rest.data, axis=-1, keepdims=True)) < ZERO_COLUMN_NORM
    if np.any(zero):
        uniform = np.full(rest.shape, 1.0 / np.sqrt(num_classes - 1))
        rest = ops.where(np.broadcast_to(zero, rest.shape), uniform, rest)
    return rest / ops.l2_norm(rest, axis=-1, keepdims=True)


def _require_room(size: int, num_classes: int) -> None:
    if size > num_classes - 1:
        raise ShapeError(
            "ensemble_diversity",
            (num_classes - 1, size),
            reason=(
                f"K={size} members exceed L-1={num_classes - 1} non-maximal "
                "dimensions, so the Gram matrix is structurally singular"
            ),
        )


def log_diversity(columns: Tensor, det_offset: float) -> Tensor:
    """``ln det(C C^T + det_offset * I)`` for member rows ``C``."""
    _require_room(columns.shape[-2], columns.shape[-1] + 1)
    return ops.logdet_gram(columns, det_offset)


def adp_term(probs: Tensor, y: np.ndarray, cfg: AdpConfig) -> Optional[Tensor]:
    """
    ``alpha * H(F_en) + beta * ln ED`` per input; ``None`` when both
    coefficients are zero so that baseline training records no extra ops.
    """
    term: Optional[Tensor] = None
    if cfg.alpha != 0.0:
        term = cfg.alpha * entropy(ops.mean(probs, axis=-2))
    if cfg.beta != 0.0:
        led = cfg.beta * log_diversity(nonmax_columns(probs, y), cfg.det_offset)
        term = led if term is None else term + led
    return term


def _check_labels(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.intp)
    if np.any(y < 0) or np.any(y >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return y


def adp_objective(
    ens: Ensemble,
    x: Union[np.ndarray, Tensor],
    y: np.ndarray,
    cfg: AdpConfig,
    *,
    bound: Optional[Sequence[Optional[BoundParams]]] = None,
    temperature: float = 1.0,
) -> Tensor:
    """
    Mini-batch training objective ``mean[ sum_k CE^k - ADP ]``.

    With ``alpha = beta = 0`` this is exactly the mean ensemble cross-entropy.
    """
    y = _check_labels(y, ens.num_classes)
    if not isinstance(x, Tensor):
        if len(y) == 0:
            raise ValueError("batch must not be empty")
        graph = bound[0].weights[0].graph if bound and bound[0] is not None else Graph()
        x = graph.constant(x)
    if x.shape[0] == 0 or x.shape[0] != len(y):
        raise ShapeError("adp_objective", x.shape, y.shape)

    out = ens.forward(x, bound=bound, temperature=temperature)
    ce = -ops.sum(ops.pick(out.log_probs, y[:, None]), axis=-1)
    reg = adp_term(out.probs, y, cfg)
    per_example = ce if reg is None else ce - reg
    return ops.mean(per_example)


def prediction_objective_tensor(probs: Tensor, y: int, cfg: AdpConfig) -> Tensor:
    """``sum_k -ln F^k_y - ADP`` for one prediction set given as ``(K, L)``."""
    ce = -ops.sum(ops.log(ops.pick(probs, np.full(probs.shape[0], y))))
    reg = adp_term(probs, np.asarray(y), cfg)
    return ce if reg is None else ce - reg


def jsd_tensor(probs: Tensor) -> Tensor:
    """``H(F_en) - mean_k H(F^k)`` along the member axis ``-2``."""
    return entropy(ops.mean(probs, axis=-2)) - ops.mean(entropy(probs), axis=-1)


# ---------- single prediction sets ----------
def shannon_entropy(p: np.ndarray) -> float:
    """``-sum p_i ln p_i`` with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    return evaluate(entropy, p)


def evaluate_array(f, point: np.ndarray) -> np.ndarray:
    graph = Graph()
    return f(graph.constant(point)).data


def nonmax_matrix(preds: PredictionSet) -> NonMaxMatrix:
    columns = evaluate_array(lambda t: nonmax_columns(t, np.asarray(preds.y)), preds.probs)
    return NonMaxMatrix(matrix=columns.T, y=preds.y)


def ensemble_diversity(m: NonMaxMatrix, det_offset: float = 1e-12) -> float:
    """``det(M^T M + det_offset * I)``, the squared spanned volume."""
    if det_offset < 0:
        raise ValueError("'det_offset' must be non-negative")
    dims, size = m.matrix.shape
    _require_room(size, dims + 1)
    graph = Graph()
    c = graph.constant(m.columns)
    gram = c @ ops.swapaxes(c, -1, -2) + det_offset * np.eye(size)
    return float(ops.det(gram).data)


def adp_regularizer(preds: PredictionSet, cfg: AdpConfig) -> float:
    graph = Graph()
    term = adp_term(graph.constant(preds.probs), np.asarray(preds.y), cfg)
    return 0.0 if term is None else term.item()


def prediction_objective(preds: PredictionSet, cfg: AdpConfig) -> float:
    return evaluate(lambda t: prediction_objective_tensor(t, preds.y, cfg), preds.probs)


def jsd_diversity(preds: PredictionSet) -> float:
    """Generalised Jensen-Shannon divergence of the member predictions."""
    return evaluate(jsd_tensor, preds.probs)


def batch_log_diversity(probs: np.ndarray, y: np.ndarray, det_offset: float = 1e-12) -> np.ndarray:
    """``ln ED`` for a batch ``(n, K, L)`` of prediction sets."""
    return evaluate_array(
        lambda t: log_diversity(nonmax_columns(t, y), det_offset), probs
    )
