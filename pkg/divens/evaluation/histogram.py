from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from divens.dataio.dataset import Dataset
from divens.diversity.measures import batch_log_diversity
from divens.models.ensemble import Ensemble


@dataclass(frozen=True, kw_only=True, eq=False)
class DiversityHistogram:
    edges: np.ndarray  # (bins + 1,)
    counts: np.ndarray  # (bins,)
    median: float

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"bin_lo": self.edges[:-1], "bin_hi": self.edges[1:], "count": self.counts}
        )


def diversity_histogram(
    ens: Ensemble, data: Dataset, bins: int = 50, det_offset: float = 1e-12
) -> DiversityHistogram:
    """Histogram and median of ``ln ED`` over ``data``, removing the true label."""
    if bins < 1:
        raise ValueError("'bins' must be at least 1")
    if len(data) == 0:
        raise ValueError(f"dataset '{data.name}' ({data.split}) is empty")
    values = batch_log_diversity(ens.member_probs(data.features), data.labels, det_offset)
    counts, edges = np.histogram(values, bins=bins)
    return DiversityHistogram(edges=edges, counts=counts, median=float(np.median(values)))
