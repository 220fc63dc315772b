"""Dense float64 tensors with reverse-mode differentiation."""

from .tensor import Gradients, Graph, Node, Tensor, backward  # isort: skip
from . import ops
from .checks import evaluate, finite_diff_check, value_and_grad

__all__ = [
    "Graph",
    "Node",
    "Tensor",
    "Gradients",
    "backward",
    "ops",
    "finite_diff_check",
    "value_and_grad",
    "evaluate",
]
