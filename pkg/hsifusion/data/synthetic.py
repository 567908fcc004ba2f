"""
Synthetic Scenes
================

Desk-scale stand-ins for natural hyperspectral cubes: a handful of smooth
material spectra laid out over a Voronoi partition (sharp edges), with
low-frequency shading and a small per-band texture so the pixel spectra
span the full band space.
"""

import logging
from typing import List

import numpy as np
from scipy.ndimage import gaussian_filter

from ..core import HsiCube, Rng
from ..exceptions import ParameterError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_MATERIALS = 6
SEEDS_PER_MATERIAL = 3
TEXTURE_AMPLITUDE = 0.03


def material_spectra(count: int, bands: int, rng: Rng) -> np.ndarray:
    """(count, bands) smooth reflectance curves in [0.05, 0.95]"""
    grid = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((count, bands))
    for m in range(count):
        peaks = rng.integers(1, 4)
        centers = rng.uniform(-0.2, 1.2, size=peaks)
        widths = rng.uniform(0.1, 0.4, size=peaks)
        heights = rng.uniform(0.3, 1.0, size=peaks)
        curve = np.sum(heights[:, None] * np.exp(-0.5 * ((grid[None, :] - centers[:, None]) / widths[:, None]) ** 2), axis=0)
        curve = curve / curve.max()
        low = rng.uniform(0.05, 0.3)
        high = rng.uniform(0.6, 0.95)
        spectra[m] = low + (high - low) * curve
    return spectra


def _smooth_field(height: int, width: int, rng: Rng, sigma: float) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((height, width)), sigma=sigma, mode='reflect')
    spread = field.max() - field.min()
    return (field - field.min()) / spread if spread > 0 else np.zeros_like(field)


def synthetic_scene(bands: int, height: int, width: int, rng: Rng, materials: int = DEFAULT_MATERIALS) -> HsiCube:
    """
    Piecewise-smooth HR cube with values in [0, 1]

    Args:
        bands, height, width: cube shape
        rng: random stream; the same stream state gives the same scene
        materials: number of distinct spectra
    """
    if min(bands, height, width) < 1:
        raise ShapeError(f"scene shape must be positive, got {(bands, height, width)}")
    if materials < 1:
        raise ParameterError(f"need at least one material, got {materials}")

    spectra = material_spectra(materials, bands, rng)

    seeds = SEEDS_PER_MATERIAL * materials
    seed_rows = rng.uniform(0, height, size=seeds)
    seed_cols = rng.uniform(0, width, size=seeds)
    seed_material = rng.integers(0, materials, size=seeds)
    rows, cols = np.mgrid[0:height, 0:width]
    distance = (rows[None] - seed_rows[:, None, None]) ** 2 + (cols[None] - seed_cols[:, None, None]) ** 2
    labels = seed_material[np.argmin(distance, axis=0)]

    shading = 0.75 + 0.25 * _smooth_field(height, width, rng, sigma=max(height, width) / 6.0)
    cube = spectra[labels].transpose(2, 0, 1) * shading[None]

    texture = np.stack([_smooth_field(height, width, rng, sigma=2.0) for _ in range(bands)])
    cube = cube + TEXTURE_AMPLITUDE * (texture - 0.5)

    logger.debug(f"Synthetic scene {bands}x{height}x{width} with {materials} materials")
    return HsiCube(np.clip(cube, 0.0, 1.0))


def crop_patches(cube: HsiCube, size: int, stride: int) -> List[HsiCube]:
    """All size x size patches on a stride grid, row-major order"""
    if size < 1 or stride < 1:
        raise ParameterError(f"size and stride must be positive, got {size}, {stride}")
    if size > cube.height or size > cube.width:
        raise ShapeError(f"patch {size} larger than cube {cube.height}x{cube.width}")
    patches = []
    for top in range(0, cube.height - size + 1, stride):
        for left in range(0, cube.width - size + 1, stride):
            patches.append(HsiCube(cube.data[:, top:top + size, left:left + size]))
    return patches
