"""Decomposition container files.

Layout, little-endian::

    magic      4 bytes  b"TKRD"
    version    u32      1
    order      u64      N
    dims       N x u64
    core dims  N x u64
    core       prod(core dims) x f64, mode 1 fastest
    factors    for n = 1..N: I_n * J_n x f64, column-major (rows fastest)
    crc32      u32      over every preceding byte
"""

import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from ..models import ContainerError, TuckerModel

logger = logging.getLogger("tucker_ooc.storage.container")

MAGIC = b"TKRD"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")
_CRC = struct.Struct("<I")


def model_to_bytes(model: TuckerModel) -> bytes:
    parts = [
        _PREFIX.pack(MAGIC, VERSION, model.order),
        np.asarray(model.dims, dtype="<u8").tobytes(),
        np.asarray(model.core_dims, dtype="<u8").tobytes(),
        np.asarray(model.core, dtype="<f8").ravel(order="F").tobytes(),
    ]
    parts.extend(np.asarray(f, dtype="<f8").ravel(order="F").tobytes() for f in model.factors)
    body = b"".join(parts)
    return body + _CRC.pack(zlib.crc32(body))


def model_from_bytes(raw: bytes) -> TuckerModel:
    if len(raw) < _PREFIX.size + _CRC.size:
        raise ContainerError("container is truncated")
    (crc,) = _CRC.unpack_from(raw, len(raw) - _CRC.size)
    if crc != zlib.crc32(raw[: -_CRC.size]):
        raise ContainerError("container checksum mismatch")
    magic, version, order = _PREFIX.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ContainerError(f"not a decomposition container (magic={magic!r})")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    offset = _PREFIX.size
    try:
        dims = np.frombuffer(raw, "<u8", order, offset).astype(np.int64)
        offset += 8 * order
        core_dims = np.frombuffer(raw, "<u8", order, offset).astype(np.int64)
        offset += 8 * order
        size = int(np.prod(core_dims))
        core = np.frombuffer(raw, "<f8", size, offset).reshape(core_dims, order="F").copy()
        offset += 8 * size
        factors = []
        for rows, cols in zip(dims, core_dims):
            count = int(rows * cols)
            factor = np.frombuffer(raw, "<f8", count, offset).reshape((rows, cols), order="F")
            factors.append(factor.copy())
            offset += 8 * count
    except ValueError as e:
        raise ContainerError("container is truncated", str(e))
    if offset != len(raw) - _CRC.size:
        raise ContainerError(f"container has {len(raw) - _CRC.size - offset} trailing bytes")
    return TuckerModel(core=core, factors=factors)


def save_model(model: TuckerModel, path) -> int:
    """Write ``model``; returns the file size in bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = model_to_bytes(model)
    path.write_bytes(raw)
    logger.info(f"Saved {model.core_dims} core over {model.dims} to {path}")
    return len(raw)


def load_model(path) -> TuckerModel:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ContainerError(f"cannot read {path}", str(e))
    return model_from_bytes(raw)
