"""
Experiment configuration read from JSON.

Every section has defaults, so ``{}`` describes the desk-scale synthetic
run. Unknown keys are rejected before anything is computed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal, Optional, Sequence, Union, get_args

from divens.attacks.config import ATTACK_METHODS, AttackConfig, AttackMethod
from divens.dataio.dataset import Dataset
from divens.dataio.idx import load_idx
from divens.dataio.synthetic import synth_blobs
from divens.diversity.measures import AdpConfig
from divens.errors import UsageError
from divens.models.mlp import MlpConfig
from divens.rng import derive_rng
from divens.training.config import AdvTConfig, TrainConfig

DatasetKind = Literal["auto", "mnist", "blobs"]

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True, kw_only=True)
class DatasetSpec:
    kind: DatasetKind = "auto"
    mnist_dir: str = "data/mnist"
    n_train: int = 4000
    n_test: int = 1000
    num_classes: int = 10
    dim: int = 20
    n_per_class: int = 200
    spread: float = 0.08
    test_fraction: float = 0.2

    def __post_init__(self):
        if self.kind not in get_args(DatasetKind):
            raise ValueError(f"'kind' must be one of {get_args(DatasetKind)}")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("'n_train' and 'n_test' must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("'test_fraction' must lie in (0, 1)")


@dataclass(frozen=True, kw_only=True)
class ModelSpec:
    """Member architecture; input size and class count come from the data."""

    hidden_layers: Sequence[int] = (64, 64)
    temperature: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("'hidden_layers' must contain positive sizes")
        if not self.temperature > 0:
            raise ValueError("'temperature' must be positive")

    def mlp_config(self, input_dim: int, num_classes: int) -> MlpConfig:
        return MlpConfig(
            input_dim=input_dim,
            hidden_layers=self.hidden_layers,
            num_classes=num_classes,
            temperature=self.temperature,
        )


@dataclass(frozen=True, kw_only=True)
class EvalConfig:
    """Attacks and sizes used by ``eval``, ``transfer``, ``detect`` and ``hist``."""

    limit: Optional[int] = None
    transfer_method: AttackMethod = "pgd"
    transfer_eps: float = 0.15
    transfer_limit: Optional[int] = 200
    detect_method: AttackMethod = "pgd"
    detect_eps: float = 0.3
    detect_limit: Optional[int] = 500
    hist_bins: int = 50

    def __post_init__(self):
        for name in ("transfer_method", "detect_method"):
            if getattr(self, name) not in ATTACK_METHODS:
                raise ValueError(f"'{name}' must be one of {ATTACK_METHODS}")
        for name in ("limit", "transfer_limit", "detect_limit"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"'{name}' must be positive")
        if self.hist_bins < 1:
            raise ValueError("'hist_bins' must be positive")


def _default_attacks() -> tuple[AttackConfig, ...]:
    return (
        AttackConfig(method="fgsm", eps=0.1, steps=1),
        AttackConfig(method="pgd", eps=0.1, steps=10),
    )


@dataclass(frozen=True, kw_only=True)
class ExperimentConfig:
    seed: int = 0
    ensemble_size: int = 3
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    attacks: tuple[AttackConfig, ...] = field(default_factory=_default_attacks)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "attacks", tuple(self.attacks))
        if self.ensemble_size < 1:
            raise ValueError("'ensemble_size' must be at least 1")
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", replace(self.train, seed=self.seed))

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> ExperimentConfig:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}", path=str(path)) from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        data = _check_keys(cls, data, "experiment")
        kwargs: dict[str, Any] = {}
        for key in ("seed", "ensemble_size", "output_dir"):
            if key in data:
                kwargs[key] = data[key]
        if "dataset" in data:
            kwargs["dataset"] = DatasetSpec(**_check_keys(DatasetSpec, data["dataset"], "dataset"))
        if "model" in data:
            kwargs["model"] = ModelSpec(**_check_keys(ModelSpec, data["model"], "model"))
        if "train" in data:
            kwargs["train"] = _train_config(data["train"], kwargs.get("seed", 0))
        if "attacks" in data:
            if not isinstance(data["attacks"], list):
                raise ValueError("'attacks' must be a list")
            kwargs["attacks"] = tuple(
                AttackConfig(**_check_keys(AttackConfig, a, "attacks[]")) for a in data["attacks"]
            )
        if "evaluation" in data:
            kwargs["evaluation"] = EvalConfig(
                **_check_keys(EvalConfig, data["evaluation"], "evaluation")
            )
        return cls(**kwargs)

    def to_dict(self) -> dict:
        """The resolved configuration in the layout :meth:`from_dict` reads."""
        train = self.train.to_dict()
        del train["seed"]
        return {
            "seed": self.seed,
            "ensemble_size": self.ensemble_size,
            "dataset": asdict(self.dataset),
            "model": {"hidden_layers": list(self.model.hidden_layers), "temperature": self.model.temperature},
            "train": train,
            "attacks": [a.to_dict() for a in self.attacks],
            "evaluation": asdict(self.evaluation),
            "output_dir": self.output_dir,
        }


def _check_keys(cls, data: Any, section: str) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ValueError(f"config section '{section}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown keys in config section '{section}': {', '.join(unknown)}")
    return dict(data)


def _train_config(data: Any, seed: int) -> TrainConfig:
    data = _check_keys(TrainConfig, data, "train")
    if "seed" in data:
        raise ValueError("set the seed at the top level of the config, not under 'train'")
    if "adp" in data:
        data["adp"] = AdpConfig(**_check_keys(AdpConfig, data["adp"], "train.adp"))
    if data.get("advt") is not None:
        data["advt"] = AdvTConfig(**_check_keys(AdvTConfig, data["advt"], "train.advt"))
    return TrainConfig(seed=seed, **data)


def _mnist_paths(root: Path, split: str) -> Optional[tuple[Path, Path]]:
    paths = []
    for stem in MNIST_FILES[split]:
        candidates = [root / stem, root / f"{stem}.gz"]
        found = next((p for p in candidates if p.exists()), None)
        if found is None:
            return None
        paths.append(found)
    return paths[0], paths[1]


def load_desk_dataset(spec: DatasetSpec, seed: int) -> tuple[Dataset, Dataset]:
    """
    Train/test pair for a desk-scale run: the first ``n_train``/``n_test``
    MNIST examples when the IDX files are present, otherwise seeded blobs.
    """
    root = Path(spec.mnist_dir)
    train_paths = _mnist_paths(root, "train")
    test_paths = _mnist_paths(root, "test")
    have_mnist = train_paths is not None and test_paths is not None
    if spec.kind == "mnist" and not have_mnist:
        raise UsageError(f"MNIST IDX files not found under {root}", path=str(root))

    if spec.kind != "blobs" and have_mnist:
        train = load_idx(*train_paths, split="train").head(spec.n_train)
        test = load_idx(*test_paths, split="test").head(spec.n_test)
        return train, test

    blobs = synth_blobs(seed, spec.num_classes, spec.dim, spec.n_per_class, spec.spread)
    train, test = blobs.split_off(spec.test_fraction, derive_rng(seed, "blob-split"))
    return replace(train, split="train"), replace(test, split="test")
