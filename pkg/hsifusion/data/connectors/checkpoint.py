"""
Network Checkpoint Format
=========================

Same container conventions as cube files, magic b"HSPW":

    magic (4) | version u32 = 1 | tensor count u32
    per tensor: name length u32 | UTF-8 name | ndim u32 | dims u32 x ndim | float32 payload
"""

import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from ...autodiff import NetworkParams
from ...exceptions import FormatError
from .base import ArtifactConnector, PathLike

logger = logging.getLogger(__name__)

MAGIC = b'HSPW'
VERSION = 1
U32 = struct.Struct('<I')


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.blob):
            raise FormatError(f"truncated {what}: need {size} bytes, {len(self.blob) - self.offset} left", self.offset)
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        return U32.unpack(self.take(4, what))[0]


class CheckpointConnector(ArtifactConnector):
    """Reads and writes NetworkParams as HSPW files"""

    def encode(self, params: NetworkParams) -> bytes:
        parts = [MAGIC, U32.pack(VERSION), U32.pack(len(params))]
        for name, value in params.items():
            encoded = name.encode('utf-8')
            parts += [U32.pack(len(encoded)), encoded, U32.pack(value.ndim)]
            parts += [U32.pack(dim) for dim in value.shape]
            parts.append(value.astype('<f4').tobytes(order='C'))
        return b''.join(parts)

    def decode(self, blob: bytes) -> NetworkParams:
        reader = _Reader(blob)
        magic = reader.take(4, 'magic')
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
        version = reader.u32('version')
        if version != VERSION:
            raise FormatError(f"unsupported version {version}", 4)
        count = reader.u32('tensor count')

        params = NetworkParams()
        for _ in range(count):
            start = reader.offset
            name_bytes = reader.take(reader.u32('name length'), 'tensor name')
            try:
                name = name_bytes.decode('utf-8')
            except UnicodeDecodeError as e:
                raise FormatError(f"tensor name is not UTF-8: {e}", start + 4) from e
            if name in params:
                raise FormatError(f"duplicate tensor {name!r}", start)
            shape: Tuple[int, ...] = tuple(reader.u32('dimension') for _ in range(reader.u32('ndim')))
            size = int(np.prod(shape)) if shape else 1
            payload = reader.take(4 * size, f"payload of {name!r}")
            params[name] = np.frombuffer(payload, dtype='<f4').astype(np.float64).reshape(shape)

        if reader.offset != len(blob):
            raise FormatError(f"{len(blob) - reader.offset} trailing bytes", reader.offset)
        return params

    def load(self, path: PathLike) -> NetworkParams:
        path = Path(path)
        params = self.decode(path.read_bytes())
        logger.debug(f"Loaded checkpoint {params} from {path}")
        return params

    def save(self, params: NetworkParams, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.encode(params))
        logger.debug(f"Saved checkpoint {params} to {path}")
        return path


def save_checkpoint(params: NetworkParams, path: PathLike) -> Path:
    return CheckpointConnector().save(params, path)


def load_checkpoint(path: PathLike) -> NetworkParams:
    return CheckpointConnector().load(path)
