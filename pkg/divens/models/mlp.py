from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from divens.errors import ShapeError
from divens.models._classifier import Classifier
from divens.numgrad import Graph, Tensor, ops


@dataclass(frozen=True, kw_only=True)
class MlpConfig:
    """
    Architecture of one ensemble member.

    ``temperature`` is the softmax temperature used while training. Inference
    uses ``T = 1`` unless a caller asks otherwise, which gives the
    "high T in training, T = 1 in test" regime when ``temperature > 1``.
    """

    input_dim: int
    hidden_layers: Sequence[int] = (64, 64)
    num_classes: int
    temperature: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.input_dim < 1:
            raise ValueError("'input_dim' must be positive")
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("'hidden_layers' must contain positive sizes")
        if self.num_classes < 2:
            raise ValueError("'num_classes' must be at least 2")
        if not self.temperature > 0:
            raise ValueError("'temperature' must be positive")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_layers, self.num_classes)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": list(self.hidden_layers),
            "num_classes": self.num_classes,
            "temperature": self.temperature,
        }


@dataclass(frozen=True, kw_only=True, eq=False)
class ModelParams:
    """Per-layer weight matrices ``(fan_in, fan_out)`` and bias vectors."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "weights", tuple(np.array(w, dtype=np.float64) for w in self.weights)
        )
        object.__setattr__(
            self, "biases", tuple(np.array(b, dtype=np.float64) for b in self.biases)
        )
        if len(self.weights) != len(self.biases):
            raise ValueError("'weights' and 'biases' must have the same number of layers")

    @classmethod
    def initialize(cls, config: MlpConfig, rng: np.random.Generator) -> ModelParams:
        """Glorot-uniform weights and zero biases."""
        sizes = config.layer_sizes
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights=tuple(weights), biases=tuple(biases))

    @classmethod
    def zeros(cls, config: MlpConfig) -> ModelParams:
        sizes = config.layer_sizes
        return cls(
            weights=tuple(np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])),
            biases=tuple(np.zeros(o) for o in sizes[1:]),
        )

    @property
    def arrays(self) -> tuple[np.ndarray, ...]:
        """Weights then biases, the order the optimiser state follows."""
        return (*self.weights, *self.biases)

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> ModelParams:
        half = len(arrays) // 2
        return cls(weights=tuple(arrays[:half]), biases=tuple(arrays[half:]))

    def check_shapes(self, config: MlpConfig) -> Optional[int]:
        """Index of the first layer whose shapes do not chain, else ``None``."""
        sizes = config.layer_sizes
        if len(self.weights) != len(sizes) - 1:
            return min(len(self.weights), len(sizes) - 1)
        for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if self.weights[layer].shape != (fan_in, fan_out):
                return layer
            if self.biases[layer].shape != (fan_out,):
                return layer
        return None


@dataclass(frozen=True, kw_only=True)
class BoundParams:
    """Parameters of one member placed on a graph as leaves."""

    weights: tuple[Tensor, ...]
    biases: tuple[Tensor, ...]

    @property
    def tensors(self) -> tuple[Tensor, ...]:
        return (*self.weights, *self.biases)


@dataclass(frozen=True, kw_only=True, eq=False)
class Mlp(Classifier):
    """Fully connected relu network; one member ``F^k`` of an ensemble."""

    config: MlpConfig
    params: ModelParams = field(repr=False)

    def __post_init__(self):
        layer = self.params.check_shapes(self.config)
        if layer is not None:
            raise ValueError(f"parameter shapes do not chain at layer {layer}")

    @classmethod
    def initialize(cls, config: MlpConfig, rng: np.random.Generator) -> Mlp:
        return cls(config=config, params=ModelParams.initialize(config, rng))

    @property
    def num_classes(self) -> int:
        return self.config.num_classes

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def with_params(self, params: ModelParams) -> Mlp:
        return replace(self, params=params)

    def bind(self, graph: Graph, requires_grad: bool = False) -> BoundParams:
        return BoundParams(
            weights=tuple(graph.leaf(w, requires_grad) for w in self.params.weights),
            biases=tuple(graph.leaf(b, requires_grad) for b in self.params.biases),
        )

    def logits(self, x: Tensor, bound: Optional[BoundParams] = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError("mlp", x.shape, (x.shape[0] if x.ndim else 0, self.input_dim))
        if bound is None:
            bound = self.bind(x.graph)
        h = x
        last = len(bound.weights) - 1
        for layer, (w, b) in enumerate(zip(bound.weights, bound.biases)):
            h = h @ w + b
            if layer < last:
                h = ops.relu(h)
        return h
