"""
Iteration schedule and optimization manner
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict

from ..exceptions import ParameterError


class Mode(str, Enum):
    """How the degeneration and reconstruction updates are combined"""
    SEPARATE = 'separate'
    JOINT = 'joint'
    ALTERNATING = 'alternating'

    @classmethod
    def parse(cls, value) -> 'Mode':
        if isinstance(value, Mode):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"mode must be one of {[m.value for m in cls]}, got {value!r}") from None


@dataclass(frozen=True)
class Schedule:
    outer_iters: int = 40
    inner_iters: int = 10
    lr_degeneration: float = 1e-4
    lr_reconstruction: float = 1e-3

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ParameterError(f"iteration counts must be >= 1, got {self.outer_iters}, {self.inner_iters}")
        if self.lr_degeneration <= 0 or self.lr_reconstruction <= 0:
            raise ParameterError("learning rates must be positive")

    @property
    def total_budget(self) -> int:
        return self.outer_iters * self.inner_iters

    def budget(self) -> Dict[str, int]:
        """Steps every mode spends on each update"""
        total = self.total_budget
        return {'kernel': total, 'srf': total, 'reconstruction': total}
