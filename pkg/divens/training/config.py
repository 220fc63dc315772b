from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union, get_args

from divens.diversity.measures import AdpConfig

AdvTAttack = Literal["fgsm", "pgd"]


@dataclass(frozen=True, kw_only=True)
class AdvTConfig:
    """
    Adversarial training mixed 1:1 into every mini-batch. Each example gets
    its own budget drawn uniformly from ``eps_range``.
    """

    attack: AdvTAttack = "pgd"
    eps_range: tuple[float, float] = (0.01, 0.05)
    steps: int = 10

    def __post_init__(self):
        object.__setattr__(self, "eps_range", tuple(float(e) for e in self.eps_range))
        if self.attack not in get_args(AdvTAttack):
            raise ValueError(f"'attack' must be one of {get_args(AdvTAttack)}")
        if len(self.eps_range) != 2:
            raise ValueError("'eps_range' must be a pair [lo, hi]")
        lo, hi = self.eps_range
        if not 0.0 <= lo <= hi < 1.0:
            raise ValueError("'eps_range' must satisfy 0 <= lo <= hi < 1")
        if self.steps < 1:
            raise ValueError("'steps' must be at least 1")

    def to_dict(self) -> dict:
        return {"attack": self.attack, "eps_range": list(self.eps_range), "steps": self.steps}


@dataclass(frozen=True, kw_only=True)
class TrainConfig:
    """
    Simultaneous training of all members on shared mini-batches.

    ``learning_rate`` is either one rate for every member or one per member.
    A member is frozen once its validation cross-entropy has not improved by
    ``freeze_tolerance`` for ``freeze_patience`` consecutive epochs.
    """

    learning_rate: Union[float, Sequence[float]] = 0.001
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    adp: AdpConfig = field(default_factory=AdpConfig)
    freeze_patience: int = 5
    freeze_tolerance: float = 1e-4
    validation_fraction: float = 0.1
    advt: Optional[AdvTConfig] = None

    def __post_init__(self):
        if isinstance(self.learning_rate, (int, float)):
            object.__setattr__(self, "learning_rate", float(self.learning_rate))
            rates: tuple[float, ...] = (self.learning_rate,)
        else:
            rates = tuple(float(r) for r in self.learning_rate)
            object.__setattr__(self, "learning_rate", rates)
            if not rates:
                raise ValueError("'learning_rate' must not be empty")
        if any(not r > 0 for r in rates):
            raise ValueError("'learning_rate' must be positive")
        if self.batch_size < 1:
            raise ValueError("'batch_size' must be at least 1")
        if self.epochs < 1:
            raise ValueError("'epochs' must be at least 1")
        if self.freeze_patience < 1:
            raise ValueError("'freeze_patience' must be at least 1")
        if self.freeze_tolerance < 0:
            raise ValueError("'freeze_tolerance' must be non-negative")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("'validation_fraction' must lie in [0, 1)")

    def rate(self, member: int) -> float:
        if isinstance(self.learning_rate, float):
            return self.learning_rate
        if member >= len(self.learning_rate):
            raise ValueError(f"no learning rate for member {member}")
        return self.learning_rate[member]

    def to_dict(self) -> dict:
        return {
            "learning_rate": (
                self.learning_rate
                if isinstance(self.learning_rate, float)
                else list(self.learning_rate)
            ),
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
            "adp": self.adp.to_dict(),
            "freeze_patience": self.freeze_patience,
            "freeze_tolerance": self.freeze_tolerance,
            "validation_fraction": self.validation_fraction,
            "advt": None if self.advt is None else self.advt.to_dict(),
        }
