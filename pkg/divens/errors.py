"""Error hierarchy shared by the library and the command line."""

from __future__ import annotations

import json
from typing import Any


class DivensError(Exception):
    """
    Base class for all errors raised by divens.

    Every error carries the process exit code the CLI reports for it and a
    free-form ``context`` mapping with the values needed to diagnose it.
    """

    code: int = 2

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_record(self) -> str:
        """Single-line JSON record ``{code, message, context}``."""
        return json.dumps(
            {"code": self.code, "message": self.message, "context": self.context},
            default=str,
            sort_keys=False,
        )


class UsageError(DivensError):
    code = 1


class ShapeError(DivensError, ValueError):
    """Operand shapes do not fit the primitive."""

    code = 1

    def __init__(self, op: str, *shapes: tuple[int, ...], reason: str = ""):
        detail = ", ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible shapes {detail}"
        if reason:
            message = f"{message} ({reason})"
        super().__init__(message, op=op, shapes=[list(s) for s in shapes])


class NumericError(DivensError):
    code = 2


class SingularMatrixError(NumericError):
    def __init__(self, message: str, *, condition: float):
        super().__init__(message, condition=condition)
        self.condition = condition


class TrainingDivergedError(NumericError):
    def __init__(self, *, epoch: int, batch_index: int, value: float):
        super().__init__(
            f"objective became non-finite at epoch {epoch}, batch {batch_index}",
            epoch=epoch,
            batch_index=batch_index,
            value=value,
        )
        self.batch_index = batch_index


class FormatError(DivensError):
    code = 3


class IdxFormatError(FormatError):
    pass


class CheckpointError(FormatError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointJSONError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


class TheoryCheckError(DivensError):
    code = 4
