"""
Degeneration Model
==================

Forward observation operators and their adjoints:

    X = decimate_s(k (*) Z) + N_X        spatial (Phi)
    Y = P Z + N_Y                        spectral (Psi)

(*) is 2-D correlation with symmetric padding; decimation keeps the samples
at offsets floor(s/2) + i*s. Also: Gaussian / motion kernel generators, SRF
perturbation and SNR-calibrated Gaussian noise.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import softmax

from .core import BlurKernel, HsiCube, Rng, SrfMatrix, check_divisible
from .exceptions import ParameterError, ShapeError

logger = logging.getLogger(__name__)

MOTION_SUPERSAMPLING = 16


@dataclass(frozen=True)
class GaussianSpec:
    """Isotropic Gaussian kernel; sampling ranges apply only when drawn at random"""
    size: int
    sigma: float

    SIZE_RANGE = (5, 15)
    SIGMA_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class MotionSpec:
    """Straight motion-blur segment of a given length (pixels) and angle (radians)"""
    length: int
    angle: float
    thickness: float = 1.0


KernelSpec = Union[GaussianSpec, MotionSpec, BlurKernel]


@dataclass(frozen=True)
class DegenerationConfig:
    """
    Simulation settings

    srf_perturb_c=None uses srf_base unchanged as the true response;
    snr values of float('inf') disable noise.
    """
    scale: int
    kernel_spec: KernelSpec
    srf_base: SrfMatrix
    srf_perturb_c: Optional[float] = None
    snr_hsi_db: float = float('inf')
    snr_msi_db: float = float('inf')

    def __post_init__(self):
        if self.scale < 1:
            raise ParameterError(f"scale must be >= 1, got {self.scale}")
        if self.srf_perturb_c is not None and self.srf_perturb_c < 0:
            raise ParameterError(f"perturbation coefficient must be >= 0, got {self.srf_perturb_c}")


class SimulatedPair(NamedTuple):
    x: HsiCube
    y: HsiCube
    k_true: BlurKernel
    p_true: SrfMatrix


# ---------------------------------------------------------------------------
# Kernel and SRF generators
# ---------------------------------------------------------------------------

def gaussian_kernel(spec: GaussianSpec) -> BlurKernel:
    """Isotropic Gaussian sampled at integer offsets, normalized"""
    if spec.size < 1 or spec.size % 2 == 0:
        raise ParameterError(f"Gaussian kernel size must be odd, got {spec.size}")
    if spec.sigma <= 0:
        raise ParameterError(f"Gaussian sigma must be positive, got {spec.sigma}")
    radius = spec.size // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    xx, yy = np.meshgrid(offsets, offsets, indexing='ij')
    weights = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * spec.sigma ** 2))
    return BlurKernel(weights / weights.sum())


def motion_kernel(spec: MotionSpec) -> BlurKernel:
    """
    Anti-aliased motion segment

    The segment is a length x thickness rectangle centred on the origin and
    rotated by angle. Each pixel's weight is the fraction of its area covered,
    estimated on a MOTION_SUPERSAMPLING^2 grid of sub-samples. The canvas is
    the smallest odd square containing the rectangle.
    """
    if spec.length < 3:
        raise ParameterError(f"motion length must be >= 3, got {spec.length}")
    if spec.thickness < 1:
        raise ParameterError(f"motion thickness must be >= 1, got {spec.thickness}")

    cos_a, sin_a = np.cos(spec.angle), np.sin(spec.angle)
    half_len, half_thick = spec.length / 2.0, spec.thickness / 2.0
    extent = max(
        abs(cos_a) * half_len + abs(sin_a) * half_thick,
        abs(sin_a) * half_len + abs(cos_a) * half_thick,
    )
    radius = int(np.ceil(extent - 0.5 - 1e-9))
    size = 2 * radius + 1

    sub = (np.arange(MOTION_SUPERSAMPLING) + 0.5) / MOTION_SUPERSAMPLING - 0.5
    centers = np.arange(-radius, radius + 1, dtype=np.float64)
    # (size*S) sample coordinates along each axis, row = y, col = x
    coords = (centers[:, None] + sub[None, :]).ravel()
    ys, xs = np.meshgrid(coords, coords, indexing='ij')
    along = xs * cos_a + ys * sin_a
    across = -xs * sin_a + ys * cos_a
    inside = (np.abs(along) <= half_len) & (np.abs(across) <= half_thick)

    coverage = inside.reshape(size, MOTION_SUPERSAMPLING, size, MOTION_SUPERSAMPLING).mean(axis=(1, 3))
    return BlurKernel(coverage / coverage.sum())


def make_kernel(spec: KernelSpec) -> BlurKernel:
    if isinstance(spec, BlurKernel):
        return spec
    if isinstance(spec, GaussianSpec):
        return gaussian_kernel(spec)
    if isinstance(spec, MotionSpec):
        return motion_kernel(spec)
    raise ParameterError(f"unknown kernel spec {spec!r}")


def gaussian_srf(msi_bands: int, hsi_bands: int, width: Optional[float] = None) -> SrfMatrix:
    """
    Synthetic base spectral response

    msi_bands Gaussian response curves with evenly spaced centres across the
    hyperspectral band axis, each row normalized to sum 1.
    """
    if not 1 <= msi_bands < hsi_bands:
        raise ParameterError(f"need 1 <= msi_bands < hsi_bands, got {msi_bands}, {hsi_bands}")
    width = width if width is not None else hsi_bands / (2.0 * msi_bands)
    centers = (np.arange(msi_bands) + 0.5) * hsi_bands / msi_bands - 0.5
    bands = np.arange(hsi_bands, dtype=np.float64)
    curves = np.exp(-((bands[None, :] - centers[:, None]) ** 2) / (2.0 * width ** 2))
    return SrfMatrix(curves / curves.sum(axis=1, keepdims=True))


def perturb_srf(base: SrfMatrix, c: float, rng: Rng) -> SrfMatrix:
    """
    Perturbed response: row-softmax(kappa * base + c * E)

    kappa = B (number of HSI bands); E is standard normal, drawn from rng
    even when c == 0 so the stream position does not depend on c.
    """
    if c < 0:
        raise ParameterError(f"perturbation coefficient must be >= 0, got {c}")
    kappa = float(base.in_bands)
    noise = rng.standard_normal(base.weights.shape)
    logits = kappa * base.weights + c * noise
    return SrfMatrix(softmax(logits, axis=1))


# ---------------------------------------------------------------------------
# Spatial operator Phi and its adjoint
# ---------------------------------------------------------------------------

def symmetric_pad(data: np.ndarray, radius: int) -> np.ndarray:
    """Pad the two trailing axes with edge-inclusive mirroring"""
    if radius == 0:
        return data
    return np.pad(data, ((0, 0), (radius, radius), (radius, radius)), mode='symmetric')


def fold_symmetric_pad(padded: np.ndarray, radius: int) -> np.ndarray:
    """Adjoint of symmetric_pad: add mirrored border contributions back"""
    if radius == 0:
        return padded.copy()
    out = padded
    for axis in (1, 2):
        n = out.shape[axis] - 2 * radius
        core = np.take(out, np.arange(radius, radius + n), axis=axis).copy()
        left = np.flip(np.take(out, np.arange(0, radius), axis=axis), axis=axis)
        right = np.flip(np.take(out, np.arange(radius + n, radius + n + radius), axis=axis), axis=axis)
        head = [slice(None)] * 3
        tail = [slice(None)] * 3
        head[axis] = slice(0, radius)
        tail[axis] = slice(n - radius, n)
        core[tuple(head)] += left
        core[tuple(tail)] += right
        out = core
    return out


def _check_spatial(height: int, width: int, kernel_size: int, s: int):
    check_divisible(height, width, s)
    if kernel_size > min(height, width):
        raise ShapeError(f"kernel size {kernel_size} exceeds image size {(height, width)}")


def decimated_windows(z: np.ndarray, kernel_size: int, s: int) -> np.ndarray:
    """
    Padded K x K neighbourhoods at the retained sample positions

    Returns shape (bands, height/s, width/s, K, K). Correlating these windows
    with k gives the spatially degraded cube; they are also the design matrix
    of the kernel least-squares problem.
    """
    radius = kernel_size // 2
    offset = s // 2
    windows = sliding_window_view(symmetric_pad(z, radius), (kernel_size, kernel_size), axis=(1, 2))
    return windows[:, offset::s, offset::s]


def spatial_degrade_array(z: np.ndarray, k: np.ndarray, s: int) -> np.ndarray:
    """Array form of spatial_degrade, also used inside computation graphs"""
    _check_spatial(z.shape[1], z.shape[2], k.shape[0], s)
    return np.einsum('bijkl,kl->bij', decimated_windows(z, k.shape[0], s), k, optimize=True)


def spatial_adjoint_array(x: np.ndarray, k: np.ndarray, s: int, out_shape: Tuple[int, int, int]) -> np.ndarray:
    bands, height, width = out_shape
    _check_spatial(height, width, k.shape[0], s)
    if x.shape != (bands, height // s, width // s):
        raise ShapeError(f"adjoint input shape {x.shape} inconsistent with output {out_shape} at scale {s}")
    size = k.shape[0]
    radius = size // 2
    offset = s // 2
    padded = np.zeros((bands, height + 2 * radius, width + 2 * radius))
    rows, cols = x.shape[1], x.shape[2]
    for a in range(size):
        for b in range(size):
            padded[:, offset + a: offset + a + s * rows: s, offset + b: offset + b + s * cols: s] += k[a, b] * x
    return fold_symmetric_pad(padded, radius)


def spatial_kernel_gradient(z: np.ndarray, grad_x: np.ndarray, kernel_size: int, s: int) -> np.ndarray:
    """d<grad_x, Phi_k z>/dk: correlation of the residual with the decimated windows"""
    return np.einsum('bij,bijkl->kl', grad_x, decimated_windows(z, kernel_size, s), optimize=True)


def spatial_degrade(z: HsiCube, k: BlurKernel, s: int) -> HsiCube:
    """Phi: blur by correlation with k, then keep every s-th sample"""
    return HsiCube(spatial_degrade_array(z.data, k.weights, s), z.value_range)


def spatial_degrade_adjoint(x: HsiCube, k: BlurKernel, s: int, out_shape: Tuple[int, int, int]) -> HsiCube:
    """Phi^T: exact adjoint of spatial_degrade"""
    return HsiCube(spatial_adjoint_array(x.data, k.weights, s, tuple(out_shape)), x.value_range)


# ---------------------------------------------------------------------------
# Spectral operator Psi and its adjoint
# ---------------------------------------------------------------------------

def spectral_degrade_array(z: np.ndarray, p: np.ndarray) -> np.ndarray:
    if p.shape[1] != z.shape[0]:
        raise ShapeError(f"SRF expects {p.shape[1]} bands, cube has {z.shape[0]}")
    return np.einsum('jb,bhw->jhw', p, z, optimize=True)


def spectral_adjoint_array(y: np.ndarray, p: np.ndarray) -> np.ndarray:
    if p.shape[0] != y.shape[0]:
        raise ShapeError(f"SRF produces {p.shape[0]} bands, adjoint input has {y.shape[0]}")
    return np.einsum('jb,jhw->bhw', p, y, optimize=True)


def spectral_degrade(z: HsiCube, p: SrfMatrix) -> HsiCube:
    """Psi: per-pixel band mixing by P"""
    return HsiCube(spectral_degrade_array(z.data, p.weights), z.value_range)


def spectral_degrade_adjoint(y: HsiCube, p: SrfMatrix) -> HsiCube:
    """Psi^T: exact adjoint of spectral_degrade"""
    return HsiCube(spectral_adjoint_array(y.data, p.weights), y.value_range)


# ---------------------------------------------------------------------------
# Noise and simulation
# ---------------------------------------------------------------------------

def noise_sigma(x: HsiCube, snr_db: float) -> float:
    """Noise std for a target SNR referenced to mean signal power mean(x^2)"""
    power = float(np.mean(x.data ** 2))
    return float(np.sqrt(power * 10.0 ** (-snr_db / 10.0)))


def add_awgn(x: HsiCube, snr_db: float, rng: Rng) -> HsiCube:
    """Additive white Gaussian noise at snr_db; +inf returns x unchanged"""
    if np.isnan(snr_db):
        raise ParameterError("SNR must not be NaN")
    if np.isposinf(snr_db):
        return x
    sigma = noise_sigma(x, snr_db)
    return HsiCube(x.data + rng.normal(0.0, sigma, x.data.shape), x.value_range)


def simulate_pair(z: HsiCube, cfg: DegenerationConfig, rng: Rng) -> SimulatedPair:
    """
    Generate the observed LR HSI and HR MSI from a latent cube

    Random draws happen in a fixed order: SRF perturbation, HSI noise, MSI noise.
    """
    if cfg.srf_base.in_bands != z.bands:
        raise ShapeError(f"SRF expects {cfg.srf_base.in_bands} bands, cube has {z.bands}")
    k_true = make_kernel(cfg.kernel_spec)
    if cfg.srf_perturb_c is None:
        p_true = cfg.srf_base
    else:
        p_true = perturb_srf(cfg.srf_base, cfg.srf_perturb_c, rng)

    x = add_awgn(spatial_degrade(z, k_true, cfg.scale), cfg.snr_hsi_db, rng)
    y = add_awgn(spectral_degrade(z, p_true), cfg.snr_msi_db, rng)
    logger.debug(
        f"Simulated pair: X{x.shape} Y{y.shape} kernel {k_true.size}x{k_true.size}, "
        f"SNR {cfg.snr_hsi_db}/{cfg.snr_msi_db} dB"
    )
    return SimulatedPair(x, y, k_true, p_true)


@dataclass(frozen=True)
class DegenerationRanges:
    """Sampling ranges for pre-training and meta-learning degenerations"""
    size_range: Tuple[int, int] = GaussianSpec.SIZE_RANGE
    sigma_range: Tuple[float, float] = GaussianSpec.SIGMA_RANGE
    c_range: Tuple[float, float] = (5e-3, 8e-3)

    def __post_init__(self):
        low, high = self.size_range
        if low < 1 or high < low or not any(n % 2 for n in range(low, high + 1)):
            raise ParameterError(f"size range {self.size_range} contains no odd size")
        if not 0 < self.sigma_range[0] <= self.sigma_range[1]:
            raise ParameterError(f"invalid sigma range {self.sigma_range}")
        if not 0 <= self.c_range[0] <= self.c_range[1]:
            raise ParameterError(f"invalid perturbation range {self.c_range}")


def sample_degeneration(ranges: DegenerationRanges, rng: Rng) -> Tuple[GaussianSpec, float]:
    """Draw an odd kernel size, a sigma and an SRF perturbation coefficient uniformly"""
    sizes = [n for n in range(ranges.size_range[0], ranges.size_range[1] + 1) if n % 2]
    size = int(rng.choice(sizes))
    sigma = float(rng.uniform(*ranges.sigma_range))
    c = float(rng.uniform(*ranges.c_range))
    return GaussianSpec(size=size, sigma=sigma), c
