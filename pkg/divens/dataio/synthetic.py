from __future__ import annotations

import numpy as np

from divens.dataio.dataset import Dataset
from divens.rng import derive_rng


def synth_blobs(
    seed: int,
    num_classes: int = 10,
    dim: int = 20,
    n_per_class: int = 200,
    spread: float = 0.08,
) -> Dataset:
    """
    Gaussian clusters around seeded unit-sphere means with standard deviation
    ``spread``, shuffled and rescaled feature-wise into ``[0, 1]`` by the
    bounding box of the whole sample.
    """
    if num_classes < 2:
        raise ValueError("'num_classes' must be at least 2")
    if dim < 2:
        raise ValueError("'dim' must be at least 2")
    if n_per_class < 1:
        raise ValueError("'n_per_class' must be positive")
    if spread < 0:
        raise ValueError("'spread' must be non-negative")

    means = derive_rng(seed, "blob-means").normal(size=(num_classes, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    noise_rng = derive_rng(seed, "blob-noise")
    labels = np.repeat(np.arange(num_classes), n_per_class)
    features = means[labels] + spread * noise_rng.normal(size=(len(labels), dim))

    order = derive_rng(seed, "blob-order").permutation(len(labels))
    features, labels = features[order], labels[order]
    lower = features.min(axis=0)
    width = features.max(axis=0) - lower
    features = (features - lower) / np.where(width > 0, width, 1.0)
    return Dataset(
        features=np.clip(features, 0.0, 1.0),
        labels=labels,
        num_classes=num_classes,
        name="blobs",
        split="all",
    )
