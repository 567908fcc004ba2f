"""
Run Trace
=========

One record per completed outer iteration: data residuals, operator errors
against ground truth when known, quality metrics and a kernel snapshot.
Serializes to a CSV (one row per outer iteration) and a JSON-ready summary.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
import pandas as pd

from ..core import BlurKernel, HsiCube, SrfMatrix
from ..metrics import MetricReport

logger = logging.getLogger(__name__)


class GroundTruth(NamedTuple):
    """Reference quantities available for simulated scenes"""
    z: Optional[HsiCube] = None
    k: Optional[BlurKernel] = None
    p: Optional[SrfMatrix] = None


def pad_to(weights: np.ndarray, size: int) -> np.ndarray:
    """Center-pad a square odd array with zeros"""
    pad = (size - weights.shape[0]) // 2
    return np.pad(weights, pad) if pad > 0 else weights


def kernel_error(k: BlurKernel, k_true: BlurKernel) -> float:
    """Relative L2 error after centering both kernels on a common support"""
    size = max(k.size, k_true.size)
    estimate, reference = pad_to(k.weights, size), pad_to(k_true.weights, size)
    return float(np.linalg.norm(estimate - reference) / np.linalg.norm(reference))


def srf_error(p: SrfMatrix, p_true: SrfMatrix) -> float:
    """Relative Frobenius error"""
    return float(np.linalg.norm(p.weights - p_true.weights) / np.linalg.norm(p_true.weights))


@dataclass
class TraceRecord:
    outer_iter: int
    residual_x: float
    residual_y: float
    kernel_error: Optional[float] = None
    srf_error: Optional[float] = None
    metrics: Optional[MetricReport] = None
    kernel: Optional[np.ndarray] = None

    def row(self) -> Dict[str, Any]:
        row = {
            'outer_iter': self.outer_iter,
            'residual_x': self.residual_x,
            'residual_y': self.residual_y,
            'kernel_error': self.kernel_error,
            'srf_error': self.srf_error,
        }
        for name in ('rmse', 'psnr', 'sam', 'ssim'):
            row[name] = getattr(self.metrics, name) if self.metrics is not None else None
        return row


@dataclass
class RunTrace:
    mode: str
    records: List[TraceRecord] = field(default_factory=list)
    steps: Dict[str, int] = field(default_factory=lambda: {'kernel': 0, 'srf': 0, 'reconstruction': 0})

    def append(self, record: TraceRecord):
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def count(self, update: str, n: int):
        self.steps[update] += n

    def residual_sums(self) -> List[float]:
        return [r.residual_x + r.residual_y for r in self.records]

    def kernel_errors(self) -> List[Optional[float]]:
        return [r.kernel_error for r in self.records]

    def kernel_at(self, outer_iter: int) -> Optional[np.ndarray]:
        """Kernel snapshot after the given (1-based) outer iteration"""
        for record in self.records:
            if record.outer_iter == outer_iter:
                return record.kernel
        return None

    def to_frame(self) -> pd.DataFrame:
        columns = ['outer_iter', 'residual_x', 'residual_y', 'kernel_error', 'srf_error', 'rmse', 'psnr', 'sam', 'ssim']
        return pd.DataFrame([r.row() for r in self.records], columns=columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format='%.10g', lineterminator='\n')
        logger.info(f"✓ Trace with {len(self)} records written to {path}")
        return path

    def summary(self) -> Dict[str, Any]:
        final = self.records[-1] if self.records else None
        return {
            'mode': self.mode,
            'outer_iterations': len(self),
            'steps': dict(self.steps),
            'final_residual_x': final.residual_x if final else None,
            'final_residual_y': final.residual_y if final else None,
            'kernel_error': final.kernel_error if final else None,
            'srf_error': final.srf_error if final else None,
            'metrics': final.metrics.as_dict() if final and final.metrics is not None else None,
        }
