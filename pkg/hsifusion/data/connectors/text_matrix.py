"""
Plain-text matrices (kernels, SRFs): whitespace separated, fixed 10 decimals
"""

import logging
from pathlib import Path

import numpy as np

from ...core import SrfMatrix
from ...exceptions import FormatError, FusionException
from .base import ArtifactConnector, PathLike

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.10f'


class MatrixTextConnector(ArtifactConnector):
    """2-D float matrices as text"""

    def load(self, path: PathLike) -> np.ndarray:
        path = Path(path)
        try:
            matrix = np.loadtxt(path, dtype=np.float64, ndmin=2)
        except ValueError as e:
            raise FormatError(f"{path} is not a numeric matrix: {e}", 0) from e
        if matrix.size == 0:
            raise FormatError(f"{path} holds no values", 0)
        return matrix

    def save(self, matrix: np.ndarray, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, np.atleast_2d(matrix), fmt=FLOAT_FORMAT)
        return path


def save_matrix(matrix: np.ndarray, path: PathLike) -> Path:
    return MatrixTextConnector().save(matrix, path)


def load_matrix(path: PathLike) -> np.ndarray:
    return MatrixTextConnector().load(path)


def load_srf(path: PathLike) -> SrfMatrix:
    """Read an SRF matrix (b rows, B columns); rows are renormalized to sum 1"""
    raw = load_matrix(path)
    if np.any(raw < 0):
        raise FormatError(f"{path} contains negative responses", 0)
    totals = raw.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise FormatError(f"{path} has an all-zero response row", 0)
    try:
        return SrfMatrix(raw / totals)
    except FusionException as e:
        raise FormatError(f"{path} is not a valid SRF: {e}", 0) from e
