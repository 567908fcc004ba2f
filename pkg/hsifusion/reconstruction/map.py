"""
MAP Reconstruction Baseline
===========================

Pixel-space estimate of Z with known (or previously estimated) k and P:

    min_Z ||X - Phi Z||^2 + ||Y - Psi Z||^2 + lambda R(Z)

started from the bicubic upsampling of X.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.optimize import minimize

from ..core import BlurKernel, HsiCube, SrfMatrix, bicubic_upsample
from ..degeneration import (
    spatial_adjoint_array,
    spatial_degrade_array,
    spectral_adjoint_array,
    spectral_degrade_array,
)
from ..estimation import DivergenceMonitor
from ..exceptions import ParameterError, ShapeError, SolverError

logger = logging.getLogger(__name__)

REGULARIZERS = ('none', 'tikhonov', 'tv')
METHODS = ('lbfgs', 'gd')
TV_SMOOTHING = 1e-3


@dataclass(frozen=True)
class Regularizer:
    """
    Image prior R(Z) with weight lambda

    tikhonov: squared spatial gradient ||DZ||^2
    tv: smoothed isotropic total variation sum sqrt(dx^2 + dy^2 + eps^2)
    Both use forward differences with a reflecting (zero-difference) border.
    """
    kind: str = 'none'
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in REGULARIZERS:
            raise ParameterError(f"regularizer must be one of {REGULARIZERS}, got {self.kind!r}")
        if not np.isfinite(self.weight) or self.weight < 0:
            raise ParameterError(f"regularizer weight must be finite and >= 0, got {self.weight}")

    def value_and_grad(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        if self.kind == 'none' or self.weight == 0:
            return 0.0, np.zeros_like(z)
        dx, dy = forward_differences(z)
        if self.kind == 'tikhonov':
            value = float(np.sum(dx ** 2) + np.sum(dy ** 2))
            grad = 2.0 * difference_adjoint(dx, dy)
        else:
            magnitude = np.sqrt(dx ** 2 + dy ** 2 + TV_SMOOTHING ** 2)
            value = float(np.sum(magnitude))
            grad = difference_adjoint(dx / magnitude, dy / magnitude)
        return self.weight * value, self.weight * grad


def forward_differences(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical forward differences; zero across the last column/row"""
    dx = np.zeros_like(z)
    dy = np.zeros_like(z)
    dx[:, :, :-1] = z[:, :, 1:] - z[:, :, :-1]
    dy[:, :-1, :] = z[:, 1:, :] - z[:, :-1, :]
    return dx, dy


def difference_adjoint(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """D^T applied to a (gx, gy) field"""
    out = np.zeros_like(gx)
    out[:, :, :-1] -= gx[:, :, :-1]
    out[:, :, 1:] += gx[:, :, :-1]
    out[:, :-1, :] -= gy[:, :-1, :]
    out[:, 1:, :] += gy[:, :-1, :]
    return out


def total_variation(z: HsiCube) -> float:
    """Anisotropic total variation (sum of absolute forward differences)"""
    dx, dy = forward_differences(z.data)
    return float(np.abs(dx).sum() + np.abs(dy).sum())


def data_residuals(x: HsiCube, y: HsiCube, k: BlurKernel, p: SrfMatrix, s: int, z: HsiCube) -> Tuple[float, float]:
    """(||X - Phi Z||, ||Y - Psi Z||)"""
    rx = x.data - spatial_degrade_array(z.data, k.weights, s)
    ry = y.data - spectral_degrade_array(z.data, p.weights)
    return float(np.linalg.norm(rx)), float(np.linalg.norm(ry))


def map_objective(
    x: HsiCube, y: HsiCube, k: BlurKernel, p: SrfMatrix, s: int, reg: Regularizer
) -> Callable[[np.ndarray], Tuple[float, np.ndarray]]:
    """Objective and gradient over a (B, H, W) array"""
    shape = (p.in_bands, x.height * s, x.width * s)

    def fun(z: np.ndarray) -> Tuple[float, np.ndarray]:
        rx = spatial_degrade_array(z, k.weights, s) - x.data
        ry = spectral_degrade_array(z, p.weights) - y.data
        prior, prior_grad = reg.value_and_grad(z)
        value = float(np.sum(rx ** 2) + np.sum(ry ** 2)) + prior
        grad = 2.0 * spatial_adjoint_array(rx, k.weights, s, shape) + 2.0 * spectral_adjoint_array(ry, p.weights)
        return value, grad + prior_grad

    return fun


def map_reconstruct(
    x: HsiCube,
    y: HsiCube,
    k: BlurKernel,
    p: SrfMatrix,
    s: int,
    reg: Regularizer,
    iters: int,
    lr: float = 0.1,
    method: str = 'lbfgs',
) -> HsiCube:
    """
    MAP estimate of Z; returns the best-loss iterate

    method='lbfgs' uses scipy's L-BFGS-B with tight tolerances;
    method='gd' takes fixed steps of size lr, halving lr after any increase.

    Raises:
        SolverError: non-finite objective, or (gd) five consecutive increases
    """
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    if iters < 0:
        raise ParameterError(f"iters must be >= 0, got {iters}")
    if p.in_bands != x.bands:
        raise ShapeError(f"SRF expects {p.in_bands} bands, X has {x.bands}")
    if (y.height, y.width) != (x.height * s, x.width * s):
        raise ShapeError(f"Y{y.shape} does not match X{x.shape} at scale {s}")

    z0 = bicubic_upsample(x, s).data
    shape = z0.shape
    fun = map_objective(x, y, k, p, s, reg)
    best = {'loss': np.inf, 'z': z0}

    def tracked(z: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = fun(z)
        if not np.isfinite(value):
            logger.error("MAP objective became non-finite")
            raise SolverError("MAP objective became non-finite", [best['loss']])
        if value < best['loss']:
            best['loss'], best['z'] = value, z.copy()
        return value, grad

    if iters == 0:
        return HsiCube(z0, x.value_range)

    if method == 'lbfgs':
        result = minimize(
            lambda v: _flat(tracked, v, shape),
            z0.ravel(),
            jac=True,
            method='L-BFGS-B',
            options={'maxiter': iters, 'ftol': 1e-20, 'gtol': 1e-12, 'maxfun': 4 * iters + 20},
        )
        logger.info(f"MAP (L-BFGS) finished after {result.nit} iterations: {result.message}, loss {best['loss']:.6e}")
    else:
        monitor = DivergenceMonitor('MAP gradient descent')
        z = z0
        value, grad = tracked(z)
        monitor.record(value)
        step = lr
        for _ in range(iters):
            z = z - step * grad
            new_value, grad = tracked(z)
            if new_value > value:
                step *= 0.5
            monitor.record(new_value)
            value = new_value
        logger.info(f"MAP (gd) finished: loss {best['loss']:.6e}, final step {step:.3e}")

    return HsiCube(best['z'], x.value_range)


def _flat(fun, v: np.ndarray, shape) -> Tuple[float, np.ndarray]:
    value, grad = fun(v.reshape(shape))
    return value, grad.ravel()
