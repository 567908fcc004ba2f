"""
Core Types
==========

Dense cube / kernel / matrix value types shared by every module, plus
bicubic resampling and the seeded random generator.

Layout is band-major: a cube's data has shape (bands, height, width).
All math runs in float64.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import ParameterError, ShapeError

logger = logging.getLogger(__name__)

BICUBIC_A = -0.5
NORMALIZATION_TOL = 1e-9


def _frozen_copy(values, ndim: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True)
    if array.ndim != ndim:
        raise ShapeError(f"{what} must be {ndim}-D, got shape {array.shape}")
    if array.size == 0 or 0 in array.shape:
        raise ShapeError(f"{what} has a zero dimension: {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ParameterError(f"{what} contains NaN or Inf")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class HsiCube:
    """
    Hyperspectral (or multispectral) cube

    Holds the latent HR HSI, the LR HSI, the HR MSI and estimates alike.
    """
    data: np.ndarray
    value_range: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, 'data', _frozen_copy(self.data, 3, 'HsiCube data'))

    @property
    def bands(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.bands, self.height, self.width)

    @property
    def pixels(self) -> int:
        return self.height * self.width

    def flat(self) -> np.ndarray:
        """(bands, pixels) view"""
        return self.data.reshape(self.bands, -1)

    def _check_same_shape(self, other: 'HsiCube'):
        if self.shape != other.shape:
            raise ShapeError(f"cube shapes differ: {self.shape} vs {other.shape}")

    def __add__(self, other: 'HsiCube') -> 'HsiCube':
        self._check_same_shape(other)
        return HsiCube(self.data + other.data, self.value_range)

    def __sub__(self, other: 'HsiCube') -> 'HsiCube':
        self._check_same_shape(other)
        return HsiCube(self.data - other.data, self.value_range)

    def scale(self, alpha: float) -> 'HsiCube':
        return HsiCube(alpha * self.data, self.value_range)

    def dot(self, other: 'HsiCube') -> float:
        self._check_same_shape(other)
        return float(np.dot(self.data.ravel(), other.data.ravel()))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def total(self) -> float:
        return float(self.data.sum())

    def clip(self, low: float = 0.0, high: float = 1.0) -> 'HsiCube':
        return HsiCube(np.clip(self.data, low, high), self.value_range)


@dataclass(frozen=True, eq=False)
class BlurKernel:
    """Square, odd-sized, nonnegative point-spread function summing to 1"""
    weights: np.ndarray

    def __post_init__(self):
        weights = _frozen_copy(self.weights, 2, 'BlurKernel weights')
        rows, cols = weights.shape
        if rows != cols or rows % 2 == 0:
            raise ShapeError(f"kernel must be square with odd size, got {weights.shape}")
        if np.any(weights < 0):
            raise ParameterError("kernel weights must be nonnegative")
        if abs(weights.sum() - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"kernel weights must sum to 1, got {weights.sum():.12f}")
        object.__setattr__(self, 'weights', weights)

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def radius(self) -> int:
        return self.size // 2

    @classmethod
    def delta(cls, size: int = 1) -> 'BlurKernel':
        if size < 1 or size % 2 == 0:
            raise ParameterError(f"delta kernel size must be odd and positive, got {size}")
        weights = np.zeros((size, size))
        weights[size // 2, size // 2] = 1.0
        return cls(weights)

    @classmethod
    def uniform(cls, size: int) -> 'BlurKernel':
        return cls(np.full((size, size), 1.0 / (size * size)))

    def fit_support(self, size: int) -> 'BlurKernel':
        """Center-pad (or crop and renormalize) to a size x size support"""
        if size < 1 or size % 2 == 0:
            raise ParameterError(f"support size must be odd and positive, got {size}")
        if size == self.size:
            return self
        if size > self.size:
            pad = (size - self.size) // 2
            return BlurKernel(np.pad(self.weights, pad))
        trim = (self.size - size) // 2
        cropped = self.weights[trim:trim + size, trim:trim + size]
        if cropped.sum() <= 0:
            logger.warning(f"Cropping kernel {self.size}->{size} removed all mass, using delta")
            return BlurKernel.delta(size)
        return BlurKernel(cropped / cropped.sum())


@dataclass(frozen=True, eq=False)
class SrfMatrix:
    """
    Spectral response matrix P (out_bands x in_bands)

    Rows are nonnegative and sum to 1. out_bands <= in_bands; simulations
    require strictly fewer MSI bands.
    """
    weights: np.ndarray

    def __post_init__(self):
        weights = _frozen_copy(self.weights, 2, 'SrfMatrix weights')
        if weights.shape[0] > weights.shape[1]:
            raise ShapeError(f"SRF must map B bands to b <= B bands, got {weights.shape}")
        if np.any(weights < 0):
            raise ParameterError("SRF entries must be nonnegative")
        if np.any(np.abs(weights.sum(axis=1) - 1.0) > NORMALIZATION_TOL):
            raise ParameterError("every SRF row must sum to 1")
        object.__setattr__(self, 'weights', weights)

    @property
    def out_bands(self) -> int:
        return int(self.weights.shape[0])

    @property
    def in_bands(self) -> int:
        return int(self.weights.shape[1])

    @classmethod
    def identity(cls, bands: int) -> 'SrfMatrix':
        return cls(np.eye(bands))


class Rng:
    """
    Seeded random stream

    Wraps numpy's Generator over PCG64, whose output for a given seed is
    identical on every platform. Child streams are derived from
    SeedSequence([seed, offset]) so they never overlap with the parent.
    """

    ALGORITHM = 'PCG64'

    def __init__(self, seed: int = 0, _sequence: Optional[np.random.SeedSequence] = None):
        self.seed = int(seed)
        sequence = _sequence if _sequence is not None else np.random.SeedSequence(self.seed)
        self._sequence = sequence
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def derive(self, offset: int) -> 'Rng':
        """Independent child stream for a fixed offset"""
        entropy = self._sequence.entropy
        spawn_key = tuple(self._sequence.spawn_key) + (int(offset),)
        return Rng(self.seed, np.random.SeedSequence(entropy, spawn_key=spawn_key))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, values: Sequence, size=None, replace: bool = True):
        return self.generator.choice(values, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, algorithm={self.ALGORITHM})"


def cube_new(bands: int, height: int, width: int, fill: float = 0.0) -> HsiCube:
    """Cube of the given shape filled with a constant"""
    if min(bands, height, width) < 1:
        raise ShapeError(f"cube dimensions must be >= 1, got {(bands, height, width)}")
    return HsiCube(np.full((bands, height, width), float(fill)))


def cubic_weight(x: np.ndarray, a: float = BICUBIC_A) -> np.ndarray:
    """Keys cubic convolution kernel"""
    x = np.abs(np.asarray(x, dtype=np.float64))
    near = ((a + 2) * x - (a + 3)) * x * x + 1
    far = ((a * x - 5 * a) * x + 8 * a) * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def source_coordinates(n_out: int, scale: int) -> np.ndarray:
    """Half-pixel aligned source positions of n_out target samples"""
    return (np.arange(n_out, dtype=np.float64) + 0.5) / scale - 0.5


def bicubic_matrix(n_in: int, scale: int) -> np.ndarray:
    """(n_in*scale, n_in) edge-clamped bicubic interpolation matrix"""
    n_out = n_in * scale
    src = source_coordinates(n_out, scale)
    base = np.floor(src).astype(int)
    frac = src - base
    matrix = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for tap in range(-1, 3):
        cols = np.clip(base + tap, 0, n_in - 1)
        np.add.at(matrix, (rows, cols), cubic_weight(frac - tap))
    return matrix


def bilinear_matrix(n_in: int, scale: int) -> np.ndarray:
    """(n_in*scale, n_in) edge-clamped bilinear interpolation matrix"""
    n_out = n_in * scale
    src = source_coordinates(n_out, scale)
    base = np.floor(src).astype(int)
    frac = src - base
    matrix = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(matrix, (rows, np.clip(base, 0, n_in - 1)), 1.0 - frac)
    np.add.at(matrix, (rows, np.clip(base + 1, 0, n_in - 1)), frac)
    return matrix


def separable_resample(data: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Apply rows @ band @ cols.T to every band of a (bands, h, w) array"""
    return np.einsum('ij,bjk,lk->bil', rows, data, cols, optimize=True)


def bicubic_upsample(x: HsiCube, s: int) -> HsiCube:
    """Upsample every band by an integer factor with Catmull-Rom bicubic weights"""
    if s < 1:
        raise ParameterError(f"scale must be >= 1, got {s}")
    if s == 1:
        return x
    rows = bicubic_matrix(x.height, s)
    cols = bicubic_matrix(x.width, s)
    return HsiCube(separable_resample(x.data, rows, cols), x.value_range)


def check_divisible(height: int, width: int, s: int):
    """Shapes must be divisible by the scale factor"""
    if s < 1:
        raise ParameterError(f"scale must be >= 1, got {s}")
    if height % s or width % s:
        raise ShapeError(f"spatial shape {(height, width)} is not divisible by scale {s}")
