"""
Degeneration Estimation
=======================

Ridge-regularized updates of the blur kernel k given (X, Z) and of the
spectral response P given (Y, Z). Both are linear least-squares problems:

    min_k ||X - decimate_s(k (*) Z)||^2 + eta ||k||^2
    min_P ||Y - P Z||^2 + xi ||P||^2

solved by conjugate gradients on the normal equations (or plain gradient
descent), then projected to the feasible set.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Union

import numpy as np
from scipy import linalg

from .core import BlurKernel, HsiCube, SrfMatrix
from .degeneration import decimated_windows
from .exceptions import ParameterError, ShapeError, SolverError

logger = logging.getLogger(__name__)

SOLVERS = ('cg', 'gd')
DIVERGENCE_PATIENCE = 5
MONOTONE_SLACK = 1e-12
RESIDUAL_TOL = 1e-15


@dataclass(frozen=True)
class EstimationConfig:
    """Ridge weights, iteration budget and solver for the k / P updates"""
    eta: float = 1e-6
    xi: float = 1e-6
    inner_iters: int = 10
    solver: str = 'cg'
    lr: float = 1e-4
    closed_form_max_bands: int = 64

    def __post_init__(self):
        if self.eta < 0 or self.xi < 0:
            raise ParameterError(f"ridge weights must be >= 0, got eta={self.eta}, xi={self.xi}")
        if self.inner_iters < 1:
            raise ParameterError(f"inner_iters must be >= 1, got {self.inner_iters}")
        if self.solver not in SOLVERS:
            raise ParameterError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.lr <= 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")


class EstimationResult(NamedTuple):
    """Projected operator, pre-projection solution and per-iteration objective"""
    operator: Union[BlurKernel, SrfMatrix]
    raw: np.ndarray
    losses: List[float]


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------

def clamp_normalize(values: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
    """Clamp negatives to 0 and rescale to unit sum; all-zero slices become uniform"""
    clamped = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    totals = clamped.sum(axis=axis, keepdims=True)
    count = clamped.size if axis is None else clamped.shape[axis]
    uniform = np.full_like(clamped, 1.0 / count)
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, clamped / safe, uniform)


def project_kernel(raw: np.ndarray) -> BlurKernel:
    return BlurKernel(clamp_normalize(raw))


def project_srf(raw: np.ndarray) -> SrfMatrix:
    return SrfMatrix(clamp_normalize(raw, axis=1))


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

class DivergenceMonitor:
    """Counts consecutive objective increases"""

    def __init__(self, what: str):
        self.what = what
        self.losses: List[float] = []
        self._increases = 0

    def record(self, loss: float):
        if not np.isfinite(loss):
            logger.error(f"{self.what}: objective became non-finite")
            raise SolverError(f"{self.what}: objective became non-finite", self.losses + [loss])
        if self.losses and loss > self.losses[-1] + MONOTONE_SLACK * max(1.0, abs(self.losses[-1])):
            self._increases += 1
        else:
            self._increases = 0
        self.losses.append(float(loss))
        if self._increases >= DIVERGENCE_PATIENCE:
            logger.error(f"{self.what}: objective increased {DIVERGENCE_PATIENCE} iterations in a row")
            raise SolverError(
                f"{self.what} diverged: objective increased {DIVERGENCE_PATIENCE} consecutive iterations",
                list(self.losses),
            )


def conjugate_gradient(
    gram: np.ndarray,
    rhs: np.ndarray,
    x0: np.ndarray,
    iters: int,
    objective: Callable[[np.ndarray], float],
    monitor: DivergenceMonitor,
) -> np.ndarray:
    """
    CG on gram @ x = rhs for every column of rhs at once

    gram is symmetric positive semi-definite; columns converge independently.
    objective(x) is recorded before the first and after every iteration.
    """
    x = x0.copy()
    r = rhs - gram @ x
    p = r.copy()
    rs = np.sum(r * r, axis=0)
    scale = max(float(np.sum(rhs * rhs)), 1.0)
    monitor.record(objective(x))
    for i in range(iters):
        if float(rs.sum()) <= RESIDUAL_TOL * scale:
            logger.debug(f"CG converged after {i} iterations")
            break
        gp = gram @ p
        curvature = np.sum(p * gp, axis=0)
        active = curvature > 0
        alpha = np.where(active, rs / np.where(active, curvature, 1.0), 0.0)
        x = x + alpha * p
        r = r - alpha * gp
        rs_new = np.sum(r * r, axis=0)
        beta = np.where(rs > 0, rs_new / np.where(rs > 0, rs, 1.0), 0.0)
        p = r + beta * p
        rs = rs_new
        monitor.record(objective(x))
    return x


def gradient_descent(
    gram: np.ndarray,
    rhs: np.ndarray,
    x0: np.ndarray,
    iters: int,
    lr: float,
    n_obs: int,
    objective: Callable[[np.ndarray], float],
    monitor: DivergenceMonitor,
) -> np.ndarray:
    """Fixed-step descent on the objective averaged over n_obs observations"""
    x = x0.copy()
    monitor.record(objective(x))
    for _ in range(iters):
        grad = 2.0 * (gram @ x - rhs) / n_obs
        x = x - lr * grad
        monitor.record(objective(x))
    return x


# ---------------------------------------------------------------------------
# Kernel step
# ---------------------------------------------------------------------------

def kernel_design(z: HsiCube, kernel_size: int, s: int) -> np.ndarray:
    """(observations, K*K) matrix A with A @ vec(k) = vec(Phi_k z)"""
    windows = decimated_windows(z.data, kernel_size, s)
    return windows.reshape(-1, kernel_size * kernel_size)


def solve_kernel(x: HsiCube, z: HsiCube, s: int, k_init: BlurKernel, cfg: EstimationConfig) -> EstimationResult:
    """Kernel update with its pre-projection solution and loss trace"""
    if x.bands != z.bands:
        raise ShapeError(f"X has {x.bands} bands, Z has {z.bands}")
    if x.height * s != z.height or x.width * s != z.width:
        raise ShapeError(f"X{x.shape} is not Z{z.shape} decimated by {s}")
    if k_init.size > min(z.height, z.width):
        raise ShapeError(f"kernel size {k_init.size} exceeds image size {(z.height, z.width)}")

    size = k_init.size
    design = kernel_design(z, size, s)
    target = x.data.reshape(-1)
    gram = design.T @ design + cfg.eta * np.eye(size * size)
    rhs = (design.T @ target)[:, None]
    k0 = k_init.weights.reshape(-1, 1)

    def objective(k: np.ndarray) -> float:
        residual = target - design @ k[:, 0]
        return float(residual @ residual + cfg.eta * float(k[:, 0] @ k[:, 0]))

    monitor = DivergenceMonitor('kernel estimation')
    if cfg.solver == 'cg':
        raw = conjugate_gradient(gram, rhs, k0, cfg.inner_iters, objective, monitor)
    else:
        raw = gradient_descent(gram, rhs, k0, cfg.inner_iters, cfg.lr, target.size, objective, monitor)

    raw = raw[:, 0].reshape(size, size)
    logger.debug(f"Kernel step: loss {monitor.losses[0]:.6e} -> {monitor.losses[-1]:.6e}")
    return EstimationResult(project_kernel(raw), raw, monitor.losses)


def estimate_kernel_step(x: HsiCube, z: HsiCube, s: int, k_init: BlurKernel, cfg: EstimationConfig) -> BlurKernel:
    """
    Approximately minimize ||X - Phi_k Z||^2 + eta ||k||^2 from k_init

    Raises:
        SolverError: the objective increased DIVERGENCE_PATIENCE iterations in a row
    """
    return solve_kernel(x, z, s, k_init, cfg).operator


# ---------------------------------------------------------------------------
# SRF step
# ---------------------------------------------------------------------------

def solve_srf(y: HsiCube, z: HsiCube, p_init: SrfMatrix, cfg: EstimationConfig) -> EstimationResult:
    """SRF update with its pre-projection solution and loss trace"""
    if p_init.in_bands != z.bands:
        raise ShapeError(f"SRF expects {p_init.in_bands} bands, Z has {z.bands}")
    if p_init.out_bands != y.bands:
        raise ShapeError(f"SRF produces {p_init.out_bands} bands, Y has {y.bands}")
    if (y.height, y.width) != (z.height, z.width):
        raise ShapeError(f"Y{y.shape} and Z{z.shape} differ spatially")

    zf, yf = z.flat(), y.flat()
    bands = z.bands
    gram = zf @ zf.T + cfg.xi * np.eye(bands)
    cross = zf @ yf.T  # (B, b): one right-hand side per MSI band

    def objective(pt: np.ndarray) -> float:
        residual = yf - pt.T @ zf
        return float(np.sum(residual ** 2) + cfg.xi * np.sum(pt ** 2))

    monitor = DivergenceMonitor('SRF estimation')
    if bands <= cfg.closed_form_max_bands and cfg.solver == 'cg':
        if cfg.xi == 0 and np.linalg.matrix_rank(gram) < bands:
            logger.error("SRF normal matrix is singular with xi = 0")
            raise SolverError("SRF normal matrix Z Z^T is singular; use a ridge weight xi > 0")
        monitor.record(objective(p_init.weights.T))
        try:
            raw_t = linalg.solve(gram, cross, assume_a='pos')
        except linalg.LinAlgError as e:
            raise SolverError(f"SRF normal equations could not be solved: {e}; use a ridge weight xi > 0") from e
        monitor.record(objective(raw_t))
    elif cfg.solver == 'cg':
        logger.debug(f"SRF with {bands} bands: iterative CG instead of closed form")
        raw_t = conjugate_gradient(gram, cross, p_init.weights.T, cfg.inner_iters, objective, monitor)
    else:
        raw_t = gradient_descent(gram, cross, p_init.weights.T, cfg.inner_iters, cfg.lr, yf.size, objective, monitor)

    raw = raw_t.T
    return EstimationResult(project_srf(raw), raw, monitor.losses)


def estimate_srf_step(y: HsiCube, z: HsiCube, p_init: SrfMatrix, cfg: EstimationConfig) -> SrfMatrix:
    """
    Minimize ||Y - P Z||^2 + xi ||P||^2

    Closed form when B <= cfg.closed_form_max_bands, otherwise inner_iters
    CG iterations from p_init.

    Raises:
        SolverError: singular normal matrix with xi = 0, or divergence
    """
    return solve_srf(y, z, p_init, cfg).operator
