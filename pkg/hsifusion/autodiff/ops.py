"""
Layer Operations
================

Each op maps parent values to one output and returns a cache;
backward(grad, cache) returns one gradient per parent, in parent order.
Spatial tensors are (channels, height, width).
"""

from abc import ABC, abstractmethod
from typing import Any, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core import bilinear_matrix, separable_resample
from ..degeneration import (
    fold_symmetric_pad,
    spatial_adjoint_array,
    spatial_degrade_array,
    spatial_kernel_gradient,
    spectral_adjoint_array,
    spectral_degrade_array,
    symmetric_pad,
)
from ..exceptions import ShapeError
from .params import LEAKY_SLOPE


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad down to a broadcast operand's shape"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Op(ABC):
    """Differentiable operation with a fixed number of parents"""

    name = 'op'
    arity = 1

    @abstractmethod
    def forward(self, *inputs: np.ndarray) -> Tuple[np.ndarray, Any]:
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray, cache: Any) -> Tuple[np.ndarray, ...]:
        pass

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Identity(Op):
    name = 'identity'

    def forward(self, x):
        return x.copy(), None

    def backward(self, grad, cache):
        return (grad,)


class Add(Op):
    """Elementwise a + b with numpy broadcasting"""
    name = 'add'
    arity = 2

    def forward(self, a, b):
        return a + b, (a.shape, b.shape)

    def backward(self, grad, cache):
        shape_a, shape_b = cache
        return _unbroadcast(grad, shape_a), _unbroadcast(grad, shape_b)


class Mul(Op):
    name = 'mul'
    arity = 2

    def forward(self, a, b):
        return a * b, (a, b)

    def backward(self, grad, cache):
        a, b = cache
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Scale(Op):
    """Multiply by a constant"""
    name = 'scale'

    def __init__(self, factor: float):
        self.factor = float(factor)

    def forward(self, x):
        return self.factor * x, None

    def backward(self, grad, cache):
        return (self.factor * grad,)


class Reshape(Op):
    name = 'reshape'

    def __init__(self, shape: Tuple[int, ...]):
        self.shape = tuple(shape)

    def forward(self, x):
        return x.reshape(self.shape), x.shape

    def backward(self, grad, cache):
        return (grad.reshape(cache),)


class Conv2d(Op):
    """
    Stride-1 2-D convolution (correlation) with symmetric padding

    Parents: x (C_in, H, W), weight (C_out, C_in, K, K), bias (C_out,).
    """
    name = 'conv2d'
    arity = 3

    def forward(self, x, weight, bias):
        if x.ndim != 3 or weight.ndim != 4 or weight.shape[1] != x.shape[0]:
            raise ShapeError(f"conv2d input {x.shape} incompatible with weight {weight.shape}")
        size = weight.shape[2]
        if size != weight.shape[3] or size % 2 == 0:
            raise ShapeError(f"conv2d kernel must be square and odd, got {weight.shape[2:]}")
        radius = size // 2
        windows = sliding_window_view(symmetric_pad(x, radius), (size, size), axis=(1, 2))
        out = np.einsum('ocab,chwab->ohw', weight, windows, optimize=True) + bias[:, None, None]
        return out, (windows, weight, x.shape)

    def backward(self, grad, cache):
        windows, weight, in_shape = cache
        channels, height, width = in_shape
        size = weight.shape[2]
        radius = size // 2
        grad_weight = np.einsum('ohw,chwab->ocab', grad, windows, optimize=True)
        grad_bias = grad.sum(axis=(1, 2))
        columns = np.einsum('ocab,ohw->abchw', weight, grad, optimize=True)
        padded = np.zeros((channels, height + 2 * radius, width + 2 * radius))
        for a in range(size):
            for b in range(size):
                padded[:, a:a + height, b:b + width] += columns[a, b]
        return fold_symmetric_pad(padded, radius), grad_weight, grad_bias


class BandMix(Op):
    """
    Pointwise (1x1) channel mixing

    Parents: x (C_in, H, W), weight (C_out, C_in), bias (C_out,).
    """
    name = 'band_mix'
    arity = 3

    def forward(self, x, weight, bias):
        if weight.ndim != 2 or weight.shape[1] != x.shape[0]:
            raise ShapeError(f"band mix input {x.shape} incompatible with weight {weight.shape}")
        return np.einsum('oc,chw->ohw', weight, x, optimize=True) + bias[:, None, None], (x, weight)

    def backward(self, grad, cache):
        x, weight = cache
        grad_x = np.einsum('oc,ohw->chw', weight, grad, optimize=True)
        grad_weight = np.einsum('ohw,chw->oc', grad, x, optimize=True)
        return grad_x, grad_weight, grad.sum(axis=(1, 2))


class Dense(Op):
    """Parents: v (n,), weight (m, n), bias (m,)"""
    name = 'dense'
    arity = 3

    def forward(self, v, weight, bias):
        if v.ndim != 1 or weight.shape[1] != v.shape[0]:
            raise ShapeError(f"dense input {v.shape} incompatible with weight {weight.shape}")
        return weight @ v + bias, (v, weight)

    def backward(self, grad, cache):
        v, weight = cache
        return weight.T @ grad, np.outer(grad, v), grad.copy()


class LeakyReLU(Op):
    name = 'leaky_relu'

    def __init__(self, slope: float = LEAKY_SLOPE):
        self.slope = float(slope)

    def forward(self, x):
        positive = x > 0
        return np.where(positive, x, self.slope * x), positive

    def backward(self, grad, cache):
        return (np.where(cache, grad, self.slope * grad),)


class UpsampleNearest(Op):
    name = 'upsample_nearest'

    def __init__(self, scale: int):
        self.scale = int(scale)

    def forward(self, x):
        s = self.scale
        return np.repeat(np.repeat(x, s, axis=1), s, axis=2), x.shape

    def backward(self, grad, cache):
        channels, height, width = cache
        s = self.scale
        return (grad.reshape(channels, height, s, width, s).sum(axis=(2, 4)),)


class UpsampleBilinear(Op):
    """Separable, edge-clamped, half-pixel aligned bilinear upsampling"""
    name = 'upsample_bilinear'

    def __init__(self, scale: int):
        self.scale = int(scale)

    def forward(self, x):
        rows = bilinear_matrix(x.shape[1], self.scale)
        cols = bilinear_matrix(x.shape[2], self.scale)
        return separable_resample(x, rows, cols), (rows, cols)

    def backward(self, grad, cache):
        rows, cols = cache
        return (separable_resample(grad, rows.T, cols.T),)


class Concat(Op):
    """Concatenate along the channel axis"""
    name = 'concat'

    def __init__(self, count: int = 2):
        self.arity = int(count)

    def forward(self, *xs):
        sizes = [x.shape[0] for x in xs]
        return np.concatenate(xs, axis=0), np.cumsum(sizes)[:-1]

    def backward(self, grad, cache):
        return tuple(np.split(grad, cache, axis=0))


class ScaleShift(Op):
    """
    Per-channel conditioning x * (1 + gamma) + beta

    Parents: x (C, H, W), gamma (C,), beta (C,).
    """
    name = 'scale_shift'
    arity = 3

    def forward(self, x, gamma, beta):
        if gamma.shape != (x.shape[0],) or beta.shape != (x.shape[0],):
            raise ShapeError(f"scale/shift vectors {gamma.shape}, {beta.shape} do not match {x.shape[0]} channels")
        return x * (1.0 + gamma)[:, None, None] + beta[:, None, None], (x, gamma)

    def backward(self, grad, cache):
        x, gamma = cache
        return grad * (1.0 + gamma)[:, None, None], np.sum(grad * x, axis=(1, 2)), grad.sum(axis=(1, 2))


class SpatialDegradeOp(Op):
    """Phi as a layer; parents: z (B, H, W), kernel (K, K)"""
    name = 'spatial_degrade'
    arity = 2

    def __init__(self, scale: int):
        self.scale = int(scale)

    def forward(self, z, kernel):
        return spatial_degrade_array(z, kernel, self.scale), (z, kernel)

    def backward(self, grad, cache):
        z, kernel = cache
        grad_z = spatial_adjoint_array(grad, kernel, self.scale, z.shape)
        grad_kernel = spatial_kernel_gradient(z, grad, kernel.shape[0], self.scale)
        return grad_z, grad_kernel


class SpectralDegradeOp(Op):
    """Psi as a layer; parents: z (B, H, W), srf (b, B)"""
    name = 'spectral_degrade'
    arity = 2

    def forward(self, z, srf):
        return spectral_degrade_array(z, srf), (z, srf)

    def backward(self, grad, cache):
        z, srf = cache
        return spectral_adjoint_array(grad, srf), np.einsum('jhw,bhw->jb', grad, z, optimize=True)


class MSELoss(Op):
    """mean((pred - target)^2)"""
    name = 'mse'
    arity = 2

    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ShapeError(f"loss operands differ: {pred.shape} vs {target.shape}")
        diff = pred - target
        return np.asarray(np.mean(diff ** 2)), diff

    def backward(self, grad, cache):
        local = 2.0 * cache / cache.size * grad
        return local, -local


class MAELoss(Op):
    """mean(|pred - target|); subgradient 0 at exactly 0"""
    name = 'mae'
    arity = 2

    def forward(self, pred, target):
        if pred.shape != target.shape:
            raise ShapeError(f"loss operands differ: {pred.shape} vs {target.shape}")
        diff = pred - target
        return np.asarray(np.mean(np.abs(diff))), diff

    def backward(self, grad, cache):
        local = np.sign(cache) / cache.size * grad
        return local, -local


def check_arity(op: Op, parents: Sequence[int]):
    if len(parents) != op.arity:
        raise ShapeError(f"{op.name} expects {op.arity} parents, got {len(parents)}")
