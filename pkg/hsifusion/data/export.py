"""
Figure Export
=============

Binary PPM (P6) images and CSV spectra, written byte-for-byte the same on
every platform. Text matrices accompany the kernel / SRF images so figures
stay diffable.
"""

import logging
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from ..core import BlurKernel, HsiCube, SrfMatrix
from ..exceptions import ParameterError, ShapeError
from .connectors.base import PathLike
from .connectors.text_matrix import save_matrix

logger = logging.getLogger(__name__)

CONSTANT_GRAY = 128
ERROR_VMAX = 0.1

# index -> RGB, linearly interpolated to 256 entries
ERROR_LUT_ANCHORS = (
    (0, (0, 0, 128)),
    (85, (0, 255, 255)),
    (170, (255, 255, 0)),
    (255, (128, 0, 0)),
)


def _to_byte(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(255.0 * values + 0.5), 0, 255).astype(np.uint8)


def stretch_to_bytes(band: np.ndarray) -> np.ndarray:
    """Min-max stretch one 2-D band to 0..255; a constant band maps to mid-gray"""
    low, high = float(band.min()), float(band.max())
    if high <= low:
        return np.full(band.shape, CONSTANT_GRAY, dtype=np.uint8)
    return _to_byte((band - low) / (high - low))


def error_lut() -> np.ndarray:
    """(256, 3) uint8 colormap: dark blue -> cyan -> yellow -> dark red"""
    anchors = np.array([index for index, _ in ERROR_LUT_ANCHORS], dtype=np.float64)
    colors = np.array([rgb for _, rgb in ERROR_LUT_ANCHORS], dtype=np.float64)
    grid = np.arange(256, dtype=np.float64)
    channels = [np.interp(grid, anchors, colors[:, c]) for c in range(3)]
    return np.clip(np.floor(np.stack(channels, axis=1) + 0.5), 0, 255).astype(np.uint8)


def encode_ppm(rgb: np.ndarray) -> bytes:
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"PPM expects (H, W, 3) pixels, got {rgb.shape}")
    height, width, _ = rgb.shape
    header = f"P6\n{width} {height}\n255\n".encode('ascii')
    return header + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes()


def write_ppm(rgb: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_ppm(rgb))
    return path


def pseudocolor_pixels(z: HsiCube, band_triplet: Tuple[int, int, int]) -> np.ndarray:
    if len(band_triplet) != 3:
        raise ParameterError(f"need exactly three bands, got {band_triplet}")
    for band in band_triplet:
        if not 0 <= band < z.bands:
            raise ParameterError(f"band {band} out of range for a {z.bands}-band cube")
    return np.stack([stretch_to_bytes(z.data[band]) for band in band_triplet], axis=2)


def export_pseudocolor(z: HsiCube, band_triplet: Tuple[int, int, int], path: PathLike) -> Path:
    """
    Write a false-color view of three bands (R, G, B order)

    Each band is min-max stretched independently.

    Raises:
        ParameterError: a band index is out of range
    """
    path = write_ppm(pseudocolor_pixels(z, band_triplet), path)
    logger.info(f"Pseudocolor {band_triplet} -> {path}")
    return path


def error_map_pixels(ref: HsiCube, est: HsiCube, vmax: float = ERROR_VMAX) -> np.ndarray:
    if ref.shape != est.shape:
        raise ShapeError(f"error map needs equal shapes, got {ref.shape} and {est.shape}")
    if vmax <= 0:
        raise ParameterError(f"vmax must be positive, got {vmax}")
    error = np.mean(np.abs(ref.data - est.data), axis=0)
    index = np.clip(np.floor(error / vmax * 255.0 + 0.5), 0, 255).astype(np.intp)
    return error_lut()[index]


def export_error_map(ref: HsiCube, est: HsiCube, path: PathLike, vmax: float = ERROR_VMAX) -> Path:
    """Per-pixel mean absolute spectral error on a fixed [0, vmax] color scale"""
    path = write_ppm(error_map_pixels(ref, est, vmax), path)
    logger.info(f"Error map (vmax={vmax}) -> {path}")
    return path


def _gray(values: np.ndarray) -> np.ndarray:
    gray = stretch_to_bytes(values)
    return np.repeat(gray[:, :, None], 3, axis=2)


def export_kernel(k: BlurKernel, path: PathLike, upscale: int = 8) -> Tuple[Path, Path]:
    """Kernel as an enlarged grayscale PPM plus a .txt matrix next to it"""
    path = Path(path)
    pixels = _gray(np.kron(k.weights, np.ones((upscale, upscale))))
    return write_ppm(pixels, path), save_matrix(k.weights, path.with_suffix('.txt'))


def export_srf(p: SrfMatrix, path: PathLike, upscale: int = 8) -> Tuple[Path, Path]:
    """SRF as a (b x B) grayscale heat map plus a .txt matrix"""
    path = Path(path)
    pixels = _gray(np.kron(p.weights, np.ones((upscale, upscale))))
    return write_ppm(pixels, path), save_matrix(p.weights, path.with_suffix('.txt'))


def spectral_curves(ref: HsiCube, est: HsiCube, pixels: Sequence[Tuple[int, int]]) -> pd.DataFrame:
    """Long table: band, pixel, reference, estimate"""
    if ref.shape != est.shape:
        raise ShapeError(f"spectral curves need equal shapes, got {ref.shape} and {est.shape}")
    rows = []
    for row, col in pixels:
        if not (0 <= row < ref.height and 0 <= col < ref.width):
            raise ParameterError(f"pixel {(row, col)} outside {ref.height}x{ref.width}")
        for band in range(ref.bands):
            rows.append({
                'band': band,
                'row': row,
                'col': col,
                'reference': ref.data[band, row, col],
                'estimate': est.data[band, row, col],
            })
    return pd.DataFrame(rows, columns=['band', 'row', 'col', 'reference', 'estimate'])


def export_spectral_curves(ref: HsiCube, est: HsiCube, pixels: Sequence[Tuple[int, int]], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    spectral_curves(ref, est, pixels).to_csv(path, index=False, float_format='%.10g', lineterminator='\n')
    return path
