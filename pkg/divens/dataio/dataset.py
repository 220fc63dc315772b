from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True, kw_only=True, eq=False)
class Dataset:
    """Labelled inputs with features scaled into ``[0, 1]``."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    num_classes: int
    name: str = "dataset"
    split: str = "train"

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if features.ndim != 2:
            raise ValueError("'features' must have shape (n, d)")
        if labels.ndim != 1 or len(labels) != len(features):
            raise ValueError("'labels' must be a vector with one entry per example")
        if self.num_classes < 2:
            raise ValueError("'num_classes' must be at least 2")
        if features.size and (np.min(features) < 0.0 or np.max(features) > 1.0):
            raise ValueError("'features' must lie in [0, 1]")
        if labels.size and (np.min(labels) < 0 or np.max(labels) >= self.num_classes):
            raise ValueError(f"'labels' must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> Dataset:
        indices = np.asarray(indices, dtype=np.intp)
        return replace(self, features=self.features[indices], labels=self.labels[indices])

    def head(self, n: int) -> Dataset:
        return self.take(np.arange(min(n, len(self))))

    def split_off(self, fraction: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
        """Random ``(rest, held_out)`` split with ``round(fraction * n)`` held out."""
        if not 0.0 <= fraction < 1.0:
            raise ValueError("'fraction' must lie in [0, 1)")
        order = rng.permutation(len(self))
        held = int(round(fraction * len(self)))
        rest = replace(self.take(np.sort(order[held:])), split=self.split)
        held_out = replace(self.take(np.sort(order[:held])), split="validation")
        return rest, held_out
