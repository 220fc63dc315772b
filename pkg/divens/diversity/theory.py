"""
Closed-form optima of the prediction-space problem and the projected-gradient
solver used to confirm them numerically.

The prediction-space problem drops the network and optimises the K member
probability vectors directly:

    minimise  sum_k -ln F^k_y - R(F)   subject to  F^k on the simplex,

with ``R`` either the ADP regularizer or ``weight * JSD``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np
from scipy.optimize import bisect

from divens.diversity.measures import (
    AdpConfig,
    NonMaxMatrix,
    PredictionSet,
    ensemble_diversity,
    jsd_tensor,
    nonmax_matrix,
    prediction_objective_tensor,
)
from divens.diversity.simplex import project_to_simplex
from divens.errors import NumericError
from divens.numgrad import Tensor, ops, value_and_grad
from divens.rng import derive_rng

logger = logging.getLogger(__name__)

BISECT_MARGIN = 1e-9
BISECT_MAXITER = 200


@dataclass(frozen=True, kw_only=True)
class JsdConfig:
    """Weight of the Jensen-Shannon diversity term."""

    weight: float = 2.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("'weight' must be non-negative")


Regularizer = Union[AdpConfig, JsdConfig]


# ---------- closed forms ----------
def _check_sizes(size: int, num_classes: int) -> None:
    if size < 1:
        raise ValueError("ensemble size must be at least 1")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")


def smoothing_residual(size: int, num_classes: int, alpha: float, confidence: float) -> float:
    """``1/F - (alpha/K) ln(F (L-1) / (1-F))``, zero at the entropy-only optimum."""
    ratio = confidence * (num_classes - 1) / (1.0 - confidence)
    return 1.0 / confidence - alpha / size * np.log(ratio)


def solve_alpha(size: int, num_classes: int, confidence: float) -> float:
    """
    Entropy coefficient for which the optimal ensemble confidence on the true
    label equals ``confidence``:

        alpha = K / (F ln(F (L-1) / (1-F)))
    """
    _check_sizes(size, num_classes)
    if not 1.0 / num_classes < confidence < 1.0:
        raise ValueError(
            f"confidence must lie in (1/L, 1) = ({1.0 / num_classes:.6g}, 1), got {confidence}"
        )
    return size / (confidence * np.log(confidence * (num_classes - 1) / (1.0 - confidence)))


def solve_ensemble_confidence(size: int, num_classes: int, alpha: float) -> float:
    """Inverse of :func:`solve_alpha` by bisection."""
    _check_sizes(size, num_classes)
    if not alpha > 0:
        raise ValueError("'alpha' must be positive")
    lo = 1.0 / num_classes + BISECT_MARGIN
    hi = 1.0 - BISECT_MARGIN
    return float(
        bisect(
            lambda f: smoothing_residual(size, num_classes, alpha, f),
            lo,
            hi,
            xtol=1e-14,
            maxiter=BISECT_MAXITER,
        )
    )


def default_partition(size: int, num_classes: int, y: int = 0) -> list[list[int]]:
    """Contiguous blocks of the non-maximal indices, one per member."""
    rest = [j for j in range(num_classes) if j != y]
    if len(rest) % size:
        raise ValueError(f"K={size} does not divide L-1={len(rest)}")
    width = len(rest) // size
    return [rest[k * width : (k + 1) * width] for k in range(size)]


def partition_solution(
    size: int,
    num_classes: int,
    confidence: float,
    partition: Optional[Sequence[Sequence[int]]] = None,
    y: Optional[int] = None,
) -> PredictionSet:
    """
    Optimal prediction set with orthogonal non-maximal parts.

    Member ``k`` puts ``confidence`` on ``y`` and spreads the rest evenly over
    its block ``partition[k]``; the blocks partition the labels other than
    ``y``. When ``partition`` is given, ``y`` defaults to the one label it
    does not cover.
    """
    _check_sizes(size, num_classes)
    if (num_classes - 1) % size:
        raise ValueError(f"K={size} does not divide L-1={num_classes - 1}")
    if not 0.0 <= confidence <= 1.0:
        raise ValueError("confidence must lie in [0, 1]")
    if partition is None:
        partition = default_partition(size, num_classes, 0 if y is None else y)

    blocks = [list(map(int, s)) for s in partition]
    covered = [j for s in blocks for j in s]
    missing = sorted(set(range(num_classes)) - set(covered))
    if y is None:
        if len(missing) != 1:
            raise ValueError("partition must leave exactly one label uncovered")
        y = missing[0]
    width = (num_classes - 1) // size
    if (
        len(blocks) != size
        or any(len(s) != width for s in blocks)
        or len(set(covered)) != len(covered)
        or sorted(covered) != [j for j in range(num_classes) if j != y]
    ):
        raise ValueError(
            f"partition must split the {num_classes - 1} labels other than {y} "
            f"into {size} disjoint blocks of {width}"
        )

    probs = np.zeros((size, num_classes))
    probs[:, y] = confidence
    share = size * (1.0 - confidence) / (num_classes - 1)
    for k, block in enumerate(blocks):
        probs[k, block] = share
    return PredictionSet(probs=probs, y=y)


# ---------- projected gradient ----------
@dataclass(frozen=True, kw_only=True, eq=False)
class PredictionTrace:
    """Recorded iterates of :func:`optimize_prediction_space`."""

    steps: np.ndarray  # (T,)
    iterates: np.ndarray  # (T, K, L)
    objective: np.ndarray  # (T,)
    y: int
    converged: bool

    @property
    def final(self) -> PredictionSet:
        return PredictionSet(probs=project_to_simplex(self.iterates[-1]), y=self.y)

    def __len__(self) -> int:
        return len(self.steps)


def _objective(probs: Tensor, y: int, cfg: Regularizer) -> Tensor:
    if isinstance(cfg, JsdConfig):
        ce = -ops.sum(ops.log(ops.pick(probs, np.full(probs.shape[0], y))))
        return ce - cfg.weight * jsd_tensor(probs)
    return prediction_objective_tensor(probs, y, cfg)


def _initial_point(
    size: int,
    num_classes: int,
    y: int,
    rng: np.random.Generator,
    init: Literal["dirichlet", "striped"],
) -> np.ndarray:
    start = rng.dirichlet(np.ones(num_classes), size=size)
    if init == "dirichlet":
        return start
    # half Dirichlet noise, half uniform over {y} and every K-th other label
    stripes = np.zeros((size, num_classes))
    rest = [j for j in range(num_classes) if j != y]
    for k in range(size):
        stripes[k, [y, *rest[k::size]]] = 1.0
    stripes /= stripes.sum(axis=1, keepdims=True)
    return 0.5 * start + 0.5 * stripes


def optimize_prediction_space(
    size: int,
    num_classes: int,
    y: int,
    cfg: Regularizer,
    *,
    steps: int = 20_000,
    step_size: float = 0.05,
    seed: int = 0,
    max_grad_norm: float = 10.0,
    record_every: int = 100,
    tolerance: float = 1e-12,
    init: Literal["dirichlet", "striped"] = "dirichlet",
) -> PredictionTrace:
    """
    Projected gradient descent over the K simplex vectors.

    Each member's gradient is rescaled to L2 norm at most ``max_grad_norm``
    before the step. The run stops early once no entry moves by more than
    ``tolerance``. Every ``record_every``-th iterate and the last one are kept.
    """
    _check_sizes(size, num_classes)
    if steps < 1:
        raise ValueError("'steps' must be at least 1")
    if not step_size > 0 or not max_grad_norm > 0:
        raise ValueError("'step_size' and 'max_grad_norm' must be positive")
    if record_every < 1:
        raise ValueError("'record_every' must be at least 1")
    if not 0 <= y < num_classes:
        raise ValueError(f"label {y} out of range for L={num_classes}")
    if init not in ("dirichlet", "striped"):
        raise ValueError(f"unknown init {init!r}")

    probs = _initial_point(size, num_classes, y, derive_rng(seed, "theory", size, num_classes), init)
    recorded_steps, iterates, values = [], [], []
    converged = False
    value = np.nan
    for step in range(steps):
        value, grad = value_and_grad(lambda t: _objective(t, y, cfg), probs)
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericError(
                "prediction-space objective became non-finite", step=step, value=value
            )
        if step % record_every == 0:
            recorded_steps.append(step)
            iterates.append(probs.copy())
            values.append(value)

        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        grad = grad * np.minimum(1.0, max_grad_norm / np.maximum(norms, 1e-300))
        updated = project_to_simplex(probs - step_size * grad)
        moved = float(np.max(np.abs(updated - probs)))
        probs = updated
        if moved <= tolerance:
            converged = True
            break

    final_value, _ = value_and_grad(lambda t: _objective(t, y, cfg), probs)
    recorded_steps.append(step + 1)
    iterates.append(probs.copy())
    values.append(final_value)
    logger.debug(
        "prediction-space run K=%d L=%d: %d steps, objective %.6f, converged=%s",
        size, num_classes, step + 1, final_value, converged,
    )
    return PredictionTrace(
        steps=np.asarray(recorded_steps),
        iterates=np.stack(iterates),
        objective=np.asarray(values),
        y=y,
        converged=converged,
    )


# ---------- suite ----------
@dataclass(frozen=True, kw_only=True)
class TheoryCheck:
    """One measured quantity compared against its acceptance threshold."""

    name: str
    value: float
    threshold: float
    relation: Literal["<", ">"]

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return self.value < self.threshold if self.relation == "<" else self.value > self.threshold

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "value": self.value,
            "relation": self.relation,
            "threshold": self.threshold,
            "passed": self.passed,
        }


def _pairwise_dots(m: NonMaxMatrix) -> np.ndarray:
    gram = m.columns @ m.matrix
    return gram[~np.eye(gram.shape[0], dtype=bool)]


def _partition_measures(final: PredictionSet) -> tuple[float, float, float]:
    """Largest column overlap, ED, and largest gap of the support entries from ``K(1 - F_y)/(L - 1)``."""
    size, num_classes = final.probs.shape
    m = nonmax_matrix(final)
    target = size * (1.0 - float(np.mean(final.probs[:, final.y]))) / (num_classes - 1)
    rest = np.delete(final.probs, final.y, axis=1)
    support = rest[rest >= target / 2]
    entries = float(np.max(np.abs(support - target))) if support.size else np.inf
    return float(np.max(np.abs(_pairwise_dots(m)))), ensemble_diversity(m), entries


def run_theory_suite(seed: int = 0, steps: int = 20_000, runs: int = 5) -> list[TheoryCheck]:
    """
    Solve the prediction-space problem in the regimes with known optima and
    measure how close the solver gets:

    * ``one_hot_optimum``: no entropy term, every member collapses onto ``y``.
    * ``smoothing_*``: no volume term, members agree on ``F_y`` and the
      ensemble confidence solves the smoothing-factor equation.
    * ``partition_*``: both terms with ``K | (L-1)``, members have orthogonal
      non-maximal parts with equal entries.
    * ``jsd_boundary``: the Jensen-Shannon regularizer drives some coordinate
      to the simplex boundary.
    """
    checks: list[TheoryCheck] = []

    # one-hot optimum
    worst = np.inf
    for run in range(runs):
        trace = optimize_prediction_space(
            2, 4, 0, AdpConfig(alpha=0.0, beta=0.5), steps=steps, seed=seed + run
        )
        worst = min(worst, float(np.min(trace.final.probs[:, 0])))
    checks.append(TheoryCheck(name="one_hot_optimum", value=worst, threshold=0.99, relation=">"))

    # entropy-only optimum
    alpha = 2.0
    trace = optimize_prediction_space(3, 10, 0, AdpConfig(alpha=alpha, beta=0.0), steps=steps, seed=seed)
    confidence = trace.final.probs[:, 0]
    f_en = float(np.mean(confidence))
    checks.append(
        TheoryCheck(
            name="smoothing_member_spread",
            value=float(np.ptp(confidence)),
            threshold=1e-2,
            relation="<",
        )
    )
    checks.append(
        TheoryCheck(
            name="smoothing_factor_residual",
            value=abs(smoothing_residual(3, 10, alpha, f_en)) if 0.1 < f_en < 1.0 else np.inf,
            threshold=0.05,
            relation="<",
        )
    )
    checks.append(
        TheoryCheck(
            name="smoothing_worked_value",
            value=abs(solve_alpha(5, 1000, 0.9) - 0.61),
            threshold=0.01,
            relation="<",
        )
    )

    # orthogonal partition optimum, from the striped start and from random ones
    starts = [("striped", seed)] + [("dirichlet", seed + run) for run in range(runs)]
    dots, volume, entries = 0.0, np.inf, 0.0
    for init, start_seed in starts:
        trace = optimize_prediction_space(
            3, 10, 0, AdpConfig(alpha=2.0, beta=0.5), steps=steps, seed=start_seed, init=init
        )
        run_dots, run_volume, run_entries = _partition_measures(trace.final)
        dots, volume, entries = max(dots, run_dots), min(volume, run_volume), max(entries, run_entries)
    checks.append(TheoryCheck(name="partition_orthogonality", value=dots, threshold=0.05, relation="<"))
    checks.append(TheoryCheck(name="partition_volume", value=volume, threshold=0.9, relation=">"))
    checks.append(TheoryCheck(name="partition_entries", value=entries, threshold=0.02, relation="<"))

    # jsd boundary
    nearest = 0.0
    for run in range(runs):
        trace = optimize_prediction_space(2, 3, 0, JsdConfig(weight=2.0), steps=steps, seed=seed + run)
        nearest = max(nearest, float(np.min(trace.final.probs)))
    checks.append(TheoryCheck(name="jsd_boundary", value=nearest, threshold=1e-4, relation="<"))

    for check in checks:
        logger.info(
            "%s: %.6g %s %.6g -> %s",
            check.name, check.value, check.relation, check.threshold,
            "pass" if check.passed else "FAIL",
        )
    return checks
