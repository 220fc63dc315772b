"""
JSON checkpoints of trained ensembles.

Keys are written in a fixed order (``format_version``, ``adp``, ``members``,
``seed``, ``report_digest``) and every float uses Python's shortest
round-trip representation, so loading reproduces the parameters bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Optional, Union

import numpy as np

from divens.diversity.measures import AdpConfig
from divens.errors import (
    CheckpointError,
    CheckpointJSONError,
    CheckpointShapeError,
    CheckpointVersionError,
)
from divens.models.ensemble import Ensemble
from divens.models.mlp import Mlp, MlpConfig, ModelParams

if TYPE_CHECKING:
    from divens.training.trainer import TrainReport

FORMAT_VERSION = 1


@dataclass(frozen=True, kw_only=True, eq=False)
class Checkpoint:
    ensemble: Ensemble
    adp: AdpConfig
    seed: int
    report_digest: Optional[str] = None
    format_version: int = FORMAT_VERSION


def report_digest(report: TrainReport) -> str:
    """SHA-256 of the compact JSON form of ``report``."""
    payload = json.dumps(report.to_dict(), separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def checkpoint_document(
    ens: Ensemble, adp: AdpConfig, seed: int, report: Optional[TrainReport] = None
) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "adp": adp.to_dict(),
        "members": [
            {
                "config": m.config.to_dict(),
                "weights": [w.tolist() for w in m.params.weights],
                "biases": [b.tolist() for b in m.params.biases],
            }
            for m in ens.members
        ],
        "seed": int(seed),
        "report_digest": None if report is None else report_digest(report),
    }


def save_checkpoint(
    path: Union[str, Path],
    ens: Ensemble,
    adp: AdpConfig,
    seed: int,
    report: Optional[TrainReport] = None,
) -> Path:
    path = Path(path)
    try:
        text = json.dumps(checkpoint_document(ens, adp, seed, report), allow_nan=False)
    except ValueError:
        raise CheckpointError("refusing to save non-finite parameters", path=str(path)) from None
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _member(raw: Any, k: int) -> Mlp:
    if not isinstance(raw, dict) or set(raw) != {"config", "weights", "biases"}:
        raise CheckpointShapeError(f"member {k} is malformed", member=k)
    try:
        config = MlpConfig(**raw["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointShapeError(f"member {k}: bad config ({exc})", member=k) from None
    sizes = config.layer_sizes
    layers = len(sizes) - 1
    if len(raw["weights"]) != layers or len(raw["biases"]) != layers:
        raise CheckpointShapeError(
            f"member {k}: expected {layers} layers", member=k, layer=min(len(raw["weights"]), layers)
        )
    weights, biases = [], []
    for layer, (w, b) in enumerate(zip(raw["weights"], raw["biases"])):
        try:
            w_arr = np.array(w, dtype=np.float64)
            b_arr = np.array(b, dtype=np.float64)
        except (TypeError, ValueError):
            w_arr = b_arr = np.empty(0)
        if w_arr.shape != (sizes[layer], sizes[layer + 1]) or b_arr.shape != (sizes[layer + 1],):
            raise CheckpointShapeError(
                f"member {k}, layer {layer}: expected weights {(sizes[layer], sizes[layer + 1])} "
                f"and biases {(sizes[layer + 1],)}",
                member=k,
                layer=layer,
            )
        weights.append(w_arr)
        biases.append(b_arr)
    return Mlp(config=config, params=ModelParams(weights=tuple(weights), biases=tuple(biases)))


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointJSONError(
            f"{path}: malformed JSON ({exc.msg})", path=str(path), line=exc.lineno
        ) from None
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read ({exc.strerror})", path=str(path)) from None
    if not isinstance(doc, dict):
        raise CheckpointJSONError(f"{path}: top level must be an object", path=str(path))

    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: unsupported format_version {version!r}, expected {FORMAT_VERSION}",
            expected=FORMAT_VERSION,
            found=version,
        )
    try:
        adp = AdpConfig(**doc["adp"])
        members = doc["members"]
        seed = int(doc.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointJSONError(f"{path}: missing or invalid field ({exc})", path=str(path)) from None
    if not isinstance(members, list) or not members:
        raise CheckpointShapeError(f"{path}: 'members' must be a non-empty list", path=str(path))

    try:
        ensemble = Ensemble(members=tuple(_member(raw, k) for k, raw in enumerate(members)))
    except ValueError as exc:
        raise CheckpointShapeError(f"{path}: inconsistent members ({exc})", path=str(path)) from None
    return Checkpoint(
        ensemble=ensemble,
        adp=adp,
        seed=seed,
        report_digest=doc.get("report_digest"),
        format_version=version,
    )
