"""
Network Parameter Store
=======================

Named float64 tensors for the backbone (theta_f) and the reconstruction
network (theta_g), plus the initializers used when a network is built.
"""

import logging
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from ..core import Rng
from ..exceptions import ParameterError, ShapeError

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2


class NetworkParams:
    """Ordered mapping name -> array; insertion order is the serialization order"""

    def __init__(self, tensors: Optional[Mapping[str, np.ndarray]] = None):
        self._tensors: Dict[str, np.ndarray] = {}
        for name, value in (tensors or {}).items():
            self[name] = value

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise ParameterError(f"unknown parameter {name!r}") from None

    def __setitem__(self, name: str, value):
        self._tensors[name] = np.array(value, dtype=np.float64, copy=True)

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: value.shape for name, value in self._tensors.items()}

    @property
    def count(self) -> int:
        """Total number of scalar parameters"""
        return int(sum(value.size for value in self._tensors.values()))

    def copy(self) -> 'NetworkParams':
        return NetworkParams(self._tensors)

    def zeros_like(self) -> 'NetworkParams':
        return NetworkParams({name: np.zeros_like(value) for name, value in self._tensors.items()})

    def check_compatible(self, other: 'NetworkParams'):
        if self.shapes() != other.shapes():
            raise ShapeError(f"parameter sets differ: {self.shapes()} vs {other.shapes()}")

    def add_scaled(self, other: 'NetworkParams', alpha: float) -> 'NetworkParams':
        """self + alpha * other"""
        self.check_compatible(other)
        return NetworkParams({name: value + alpha * other[name] for name, value in self._tensors.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for value in self._tensors.values())

    def flatten(self) -> np.ndarray:
        if not self._tensors:
            return np.zeros(0)
        return np.concatenate([value.ravel() for value in self._tensors.values()])

    def __repr__(self) -> str:
        return f"NetworkParams({len(self)} tensors, {self.count} values)"


def kaiming_uniform(shape: Tuple[int, ...], fan_in: int, rng: Rng, slope: float = LEAKY_SLOPE) -> np.ndarray:
    """He-uniform weights for a leaky-ReLU layer: U(-b, b), b = sqrt(6 / ((1 + slope^2) fan_in))"""
    bound = np.sqrt(6.0 / ((1.0 + slope ** 2) * fan_in))
    return rng.uniform(-bound, bound, shape)
