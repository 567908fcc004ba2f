"""
Quality Metrics
===============

RMSE (0-255 scale), PSNR (per-band, [0,1] scale, capped), SAM (degrees)
and SSIM (Gaussian 11x11 window, sigma 1.5), plus MetricReport aggregation.
"""

import logging
from typing import Dict

import numpy as np
from pydantic import BaseModel
from skimage.metrics import structural_similarity

from .core import HsiCube
from .exceptions import ShapeError

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0
SAM_NORM_FLOOR = 1e-12
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
CSV_COLUMNS = ('rmse', 'psnr', 'sam', 'ssim')


class MetricReport(BaseModel):
    """The four reconstruction metrics of one estimate against its reference"""
    rmse: float
    psnr: float
    sam: float
    ssim: float

    def as_dict(self) -> Dict[str, float]:
        return self.model_dump()

    def to_csv_row(self) -> str:
        """rmse,psnr,sam,ssim with 4 decimals"""
        return ','.join(f"{getattr(self, name):.4f}" for name in CSV_COLUMNS)

    @staticmethod
    def csv_header() -> str:
        return ','.join(CSV_COLUMNS)


def _check_shapes(ref: HsiCube, est: HsiCube):
    if ref.shape != est.shape:
        raise ShapeError(f"metric inputs differ in shape: {ref.shape} vs {est.shape}")


def rmse(ref: HsiCube, est: HsiCube) -> float:
    """Root-mean-square error with both cubes mapped to 0-255"""
    _check_shapes(ref, est)
    diff = 255.0 * ref.data - 255.0 * est.data
    return float(np.sqrt(np.mean(diff ** 2)))


def psnr(ref: HsiCube, est: HsiCube) -> float:
    """Mean over bands of 10*log10(1/MSE); error-free bands count as PSNR_CAP_DB"""
    _check_shapes(ref, est)
    band_mse = np.mean((ref.data - est.data) ** 2, axis=(1, 2))
    values = np.full(band_mse.shape, PSNR_CAP_DB)
    positive = band_mse > 0
    values[positive] = np.minimum(10.0 * np.log10(1.0 / band_mse[positive]), PSNR_CAP_DB)
    return float(values.mean())


def sam(ref: HsiCube, est: HsiCube) -> float:
    """Mean spectral angle in degrees; pixels with a near-zero spectrum contribute 0"""
    _check_shapes(ref, est)
    a, b = ref.flat(), est.flat()
    norm_a = np.linalg.norm(a, axis=0)
    norm_b = np.linalg.norm(b, axis=0)
    valid = (norm_a >= SAM_NORM_FLOOR) & (norm_b >= SAM_NORM_FLOOR)
    angles = np.zeros(a.shape[1])
    # 2 atan2(|u - v|, |u + v|) on unit vectors stays exact near 0 and 180 degrees
    u = a[:, valid] / norm_a[valid]
    v = b[:, valid] / norm_b[valid]
    angles[valid] = np.degrees(2.0 * np.arctan2(np.linalg.norm(u - v, axis=0), np.linalg.norm(u + v, axis=0)))
    return float(angles.mean())


def ssim(ref: HsiCube, est: HsiCube) -> float:
    """Band-averaged SSIM on a [0,1] dynamic range"""
    _check_shapes(ref, est)
    if min(ref.height, ref.width) < SSIM_WINDOW:
        raise ShapeError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {ref.height}x{ref.width}"
        )
    per_band = [
        structural_similarity(
            ref.data[band], est.data[band],
            data_range=1.0,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            win_size=SSIM_WINDOW,
            use_sample_covariance=False,
        )
        for band in range(ref.bands)
    ]
    return float(np.mean(per_band))


def evaluate(ref: HsiCube, est: HsiCube) -> MetricReport:
    """All four metrics; SSIM is reported as NaN for images smaller than its window"""
    _check_shapes(ref, est)
    try:
        ssim_value = ssim(ref, est)
    except ShapeError:
        logger.warning(f"Image {ref.height}x{ref.width} too small for SSIM, reporting NaN")
        ssim_value = float('nan')
    return MetricReport(rmse=rmse(ref, est), psnr=psnr(ref, est), sam=sam(ref, est), ssim=ssim_value)
