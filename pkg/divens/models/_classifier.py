from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from divens.numgrad import Graph, Tensor, ops


class Classifier(ABC):
    """Abstract base class for all classifiers over ``num_classes`` labels."""

    @property
    @abstractmethod
    def num_classes(self) -> int:
        raise NotImplementedError

    @abstractmethod
    def logits(self, x: Tensor) -> Tensor:
        """Pre-softmax scores for a batch ``x`` of shape ``(n, d)``."""
        raise NotImplementedError

    def predict_proba(self, x: np.ndarray, temperature: float = 1.0) -> np.ndarray:
        """``softmax(z / T)`` evaluated on a throwaway graph."""
        if temperature <= 0:
            raise ValueError("'temperature' must be positive")
        graph = Graph()
        z = self.logits(graph.constant(np.atleast_2d(x)))
        return ops.softmax(z / temperature).data
