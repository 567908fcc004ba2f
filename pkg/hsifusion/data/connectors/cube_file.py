"""
Cube File Format
================

Layout (little-endian):

    offset  size        field
    0       4           magic b"HSIC"
    4       4           version (u32) = 1
    8       4           bands (u32)
    12      4           height (u32)
    16      4           width (u32)
    20      4*B*H*W     float32 payload, band-major
"""

import logging
import struct
from pathlib import Path

import numpy as np

from ...core import HsiCube
from ...exceptions import FormatError
from .base import ArtifactConnector, PathLike

logger = logging.getLogger(__name__)

MAGIC = b'HSIC'
VERSION = 1
HEADER = struct.Struct('<4s4I')
MAX_ELEMENTS = 2 ** 31 - 1


class CubeFileConnector(ArtifactConnector):
    """Reads and writes HsiCube as HSIC files"""

    def encode(self, cube: HsiCube) -> bytes:
        header = HEADER.pack(MAGIC, VERSION, cube.bands, cube.height, cube.width)
        return header + cube.data.astype('<f4').tobytes(order='C')

    def decode(self, blob: bytes) -> HsiCube:
        if len(blob) < HEADER.size:
            raise FormatError(f"truncated header: need {HEADER.size} bytes, file has {len(blob)}", len(blob))
        magic, version, bands, height, width = HEADER.unpack_from(blob, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", 4)
        if min(bands, height, width) == 0:
            raise FormatError(f"zero dimension in {(bands, height, width)}", 8)
        elements = bands * height * width
        if elements > MAX_ELEMENTS:
            raise FormatError(f"dimensions {(bands, height, width)} overflow the element limit", 8)

        expected = HEADER.size + 4 * elements
        if len(blob) < expected:
            raise FormatError(f"truncated payload: need {expected} bytes, file has {len(blob)}", len(blob))
        if len(blob) > expected:
            raise FormatError(f"{len(blob) - expected} trailing bytes after payload", expected)

        payload = np.frombuffer(blob, dtype='<f4', count=elements, offset=HEADER.size)
        if not np.all(np.isfinite(payload)):
            bad = int(np.argmin(np.isfinite(payload)))
            raise FormatError("payload contains NaN or Inf", HEADER.size + 4 * bad)
        return HsiCube(payload.astype(np.float64).reshape(bands, height, width))

    def load(self, path: PathLike) -> HsiCube:
        path = Path(path)
        cube = self.decode(path.read_bytes())
        logger.debug(f"Loaded cube {cube.shape} from {path}")
        return cube

    def save(self, cube: HsiCube, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.encode(cube))
        logger.debug(f"Saved cube {cube.shape} to {path}")
        return path


def save_cube(cube: HsiCube, path: PathLike) -> Path:
    return CubeFileConnector().save(cube, path)


def load_cube(path: PathLike) -> HsiCube:
    """
    Read an HSIC file

    Raises:
        FormatError: bad magic, unsupported version, truncated or oversized payload
    """
    return CubeFileConnector().load(path)
