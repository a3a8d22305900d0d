"""Slice stores: per-mode collections of sparse slice matrices on disk.

A store for an order-3 tensor fixes one mode; slice ``i`` is the matrix over the
two remaining modes (lower-numbered mode as rows). A store for an order-4 tensor
fixes an ordered pair of modes ``(p, q)``; slices are enumerated row-major in
``(i_p, i_q)``, i.e. slice id ``i_p * I_q + i_q``.

Slices are grouped ``slab_size`` at a time into slab files. Each slice is one
self-delimiting binary record, all integers little-endian::

    magic   4 bytes  b"TSLC"
    version u64      1
    rows    u64
    cols    u64
    nnz     u64
    indptr  (rows + 1) x u64
    indices nnz x u64         column of each entry, strictly increasing per row
    values  nnz x f64
    crc32   u32               over every preceding byte of the record

``manifest.json`` records the layout and byte offset of every slice and is
written last. A store is assembled in a hidden sibling directory and renamed into
place once complete, so a store directory without a manifest is never a build in
progress.
"""

import hashlib
import logging
import os
import shutil
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel

from ..config import settings
from ..memory import account
from ..models import SliceStoreError
from .coo import CooFile, parse_line
from .extsort import external_sort

logger = logging.getLogger("tucker_ooc.storage.slices")

MAGIC = b"TSLC"
VERSION = 1
_HEADER = struct.Struct("<4sQQQQ")
_CRC = struct.Struct("<I")
MANIFEST_NAME = "manifest.json"
# int64 row, int64 column, float64 value
_RECORD_BYTES = 24


@dataclass
class SliceMatrix:
    """Compressed sparse row matrix with no explicit zeros."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])

    @classmethod
    def empty(cls, rows: int, cols: int) -> "SliceMatrix":
        return cls(
            rows,
            cols,
            np.zeros(rows + 1, dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=np.float64),
        )

    @classmethod
    def from_triplets(
        cls, rows: int, cols: int, r: np.ndarray, c: np.ndarray, v: np.ndarray
    ) -> "SliceMatrix":
        """Build from 0-based coordinates; zeros dropped, duplicates rejected."""
        keep = v != 0.0
        r, c, v = r[keep], c[keep], v[keep]
        order = np.lexsort((c, r))
        r, c, v = r[order], c[order], v[order]
        if r.size > 1:
            same = (np.diff(r) == 0) & (np.diff(c) == 0)
            if np.any(same):
                k = int(np.argmax(same))
                raise SliceStoreError(f"duplicate coordinate at row {r[k]}, column {c[k]}")
        indptr = account(np.zeros(rows + 1, dtype=np.int64))
        np.cumsum(np.bincount(r, minlength=rows), out=indptr[1:])
        return cls(
            rows,
            cols,
            indptr,
            account(np.ascontiguousarray(c, dtype=np.int64)),
            account(np.ascontiguousarray(v, dtype=np.float64)),
        )

    def row_indices(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows, dtype=np.int64), np.diff(self.indptr))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.rows, self.cols))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols))
        out[self.row_indices(), self.indices] = self.data
        return out

    def frobenius_sq(self) -> float:
        return float(self.data @ self.data)

    def to_bytes(self) -> bytes:
        body = b"".join(
            [
                _HEADER.pack(MAGIC, VERSION, self.rows, self.cols, self.nnz),
                self.indptr.astype("<u8").tobytes(),
                self.indices.astype("<u8").tobytes(),
                self.data.astype("<f8").tobytes(),
            ]
        )
        return body + _CRC.pack(zlib.crc32(body))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SliceMatrix":
        if len(raw) < _HEADER.size + _CRC.size:
            raise SliceStoreError("truncated slice record")
        magic, version, rows, cols, nnz = _HEADER.unpack_from(raw, 0)
        if magic != MAGIC or version != VERSION:
            raise SliceStoreError(f"not a slice record (magic={magic!r}, version={version})")
        expected = _HEADER.size + 8 * (rows + 1) + 16 * nnz + _CRC.size
        if len(raw) != expected:
            raise SliceStoreError(f"slice record is {len(raw)} bytes, expected {expected}")
        (crc,) = _CRC.unpack_from(raw, expected - _CRC.size)
        if crc != zlib.crc32(raw[: expected - _CRC.size]):
            raise SliceStoreError("slice record checksum mismatch")
        offset = _HEADER.size
        indptr = np.frombuffer(raw, "<u8", rows + 1, offset).astype(np.int64)
        offset += 8 * (rows + 1)
        indices = np.frombuffer(raw, "<u8", nnz, offset).astype(np.int64)
        offset += 8 * nnz
        data = np.frombuffer(raw, "<f8", nnz, offset).astype(np.float64)
        return cls(int(rows), int(cols), account(indptr), account(indices), account(data))


class SliceEntry(BaseModel):
    slab: int
    offset: int
    length: int
    nnz: int


class StoreManifest(BaseModel):
    """Layout of a built slice store."""

    version: int = VERSION
    source: str
    source_sha256: str
    dims: Tuple[int, ...]
    fixed_modes: Tuple[int, ...]
    row_mode: int
    col_mode: int
    slab_size: int
    slabs: List[str]
    entries: List[SliceEntry]


def store_dirname(fixed_modes: Sequence[int]) -> str:
    return "mode_" + "_".join(str(m + 1) for m in fixed_modes)


def free_modes(order: int, fixed_modes: Sequence[int]) -> Tuple[int, int]:
    rest = tuple(m for m in range(order) if m not in fixed_modes)
    if len(rest) != 2:
        raise SliceStoreError(
            f"fixing modes {tuple(fixed_modes)} of an order-{order} tensor does not leave a matrix"
        )
    return rest


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class SliceStore:
    """Read-only view of a built store; safe for concurrent readers."""

    def __init__(self, root: Path, manifest: StoreManifest):
        self.root = Path(root)
        self.manifest = manifest

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.manifest.dims

    @property
    def fixed_modes(self) -> Tuple[int, ...]:
        return self.manifest.fixed_modes

    @property
    def row_mode(self) -> int:
        return self.manifest.row_mode

    @property
    def col_mode(self) -> int:
        return self.manifest.col_mode

    @property
    def slab_size(self) -> int:
        return self.manifest.slab_size

    @property
    def nnz(self) -> int:
        return sum(e.nnz for e in self.manifest.entries)

    @property
    def empty_slices(self) -> int:
        return sum(1 for e in self.manifest.entries if e.nnz == 0)

    def __len__(self) -> int:
        return len(self.manifest.entries)

    def fixed_index(self, i: int) -> Tuple[int, ...]:
        """0-based indices of the fixed modes for slice ``i``."""
        sizes = [self.dims[m] for m in self.fixed_modes]
        return tuple(int(k) for k in np.unravel_index(i, sizes))

    def slab_path(self, slab: int) -> Path:
        return self.root / self.manifest.slabs[slab]

    def load_slice(self, i: int) -> SliceMatrix:
        """Load slice ``i`` (0-based) with checksum verification."""
        if not 0 <= i < len(self):
            raise SliceStoreError(f"slice {i} is out of range 0..{len(self) - 1}")
        entry = self.manifest.entries[i]
        try:
            with open(self.slab_path(entry.slab), "rb") as f:
                f.seek(entry.offset)
                raw = f.read(entry.length)
        except OSError as e:
            raise SliceStoreError(f"cannot read slab {entry.slab}", str(e))
        return SliceMatrix.from_bytes(raw)

    def __iter__(self) -> Iterator[Tuple[int, SliceMatrix]]:
        """Yield ``(i, slice)`` in ascending order, one slab file open at a time."""
        start = 0
        for slab in range(len(self.manifest.slabs)):
            try:
                with open(self.slab_path(slab), "rb") as f:
                    for i in range(start, min(start + self.slab_size, len(self))):
                        entry = self.manifest.entries[i]
                        f.seek(entry.offset)
                        yield i, SliceMatrix.from_bytes(f.read(entry.length))
            except OSError as e:
                raise SliceStoreError(f"cannot read slab {slab}", str(e))
            start += self.slab_size

    def iter_range(self, start: int, stop: int) -> Iterator[Tuple[int, SliceMatrix]]:
        """Independent reader over slices ``start..stop-1`` (own file handles)."""
        for i in range(start, stop):
            yield i, self.load_slice(i)


def open_slice_store(root) -> SliceStore:
    """Reopen a previously built store."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise SliceStoreError(f"no slice store manifest in {root}")
    manifest = StoreManifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    if manifest.version != VERSION:
        raise SliceStoreError(f"unsupported slice store version {manifest.version}")
    return SliceStore(root, manifest)


def default_slab_size(dims: Sequence[int], fixed_modes: Sequence[int], nnz: int) -> int:
    """Slices per slab so that a slab is about ``settings.SLAB_TARGET_BYTES``."""
    num_slices = int(np.prod([dims[m] for m in fixed_modes]))
    rows = dims[free_modes(len(dims), fixed_modes)[0]]
    per_slice = _HEADER.size + _CRC.size + 8 * (rows + 1) + 16 * nnz / max(num_slices, 1)
    return max(1, int(settings.SLAB_TARGET_BYTES // per_slice))


def _record_buffers(capacity: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row, column and value buffers for the slice being assembled."""
    return (
        account(np.empty(capacity, dtype=np.int64)),
        account(np.empty(capacity, dtype=np.int64)),
        account(np.empty(capacity, dtype=np.float64)),
    )


def _same_layout(a: StoreManifest, b: StoreManifest) -> bool:
    return (
        a.source_sha256 == b.source_sha256
        and tuple(a.dims) == tuple(b.dims)
        and tuple(a.fixed_modes) == tuple(b.fixed_modes)
        and a.slab_size == b.slab_size
    )


def _publish(staging: Path, final: Path, manifest: StoreManifest) -> SliceStore:
    """Move a finished store into place. A store with the same layout already there wins."""
    try:
        os.replace(staging, final)
        return SliceStore(final, manifest)
    except OSError:
        pass
    try:
        existing = open_slice_store(final)
    except (SliceStoreError, ValueError):
        existing = None
    if existing is not None and _same_layout(existing.manifest, manifest):
        shutil.rmtree(staging, ignore_errors=True)
        logger.info(f"Store {final} was published concurrently, keeping it")
        return existing
    stale = Path(tempfile.mkdtemp(prefix=f".{final.name}.stale.", dir=final.parent))
    try:
        os.replace(final, stale / final.name)
        os.replace(staging, final)
    except OSError as e:
        raise SliceStoreError(f"cannot replace slice store {final}", str(e))
    finally:
        shutil.rmtree(stale, ignore_errors=True)
    return SliceStore(final, manifest)


def build_slice_store(
    coo: CooFile,
    fixed_modes: Sequence[int],
    root,
    slab_size: Optional[int] = None,
    buffer_bytes: Optional[int] = None,
    sorted_path=None,
    keep_sorted: bool = False,
) -> SliceStore:
    """Sort ``coo`` on the fixed modes and write every slice to slab files.

    The store is written to a private staging directory next to ``root`` and
    renamed into place once its manifest is complete, so concurrent builders of
    the same store never see each other's partial files. Slices are assembled in
    preallocated record buffers of up to ``buffer_bytes`` (never more than one
    dense slice), accounted like every other tracked buffer.

    Args:
        coo: Validated input
        fixed_modes: One mode (order 3) or an ordered pair of modes (order 4), 0-based
        root: Store directory
        slab_size: Consecutive slices per slab file (default from SLAB_TARGET_BYTES)
        buffer_bytes: Sort and assembly buffer size (default ``settings.SORT_BUFFER_BYTES``)
        sorted_path: Reuse an existing file already sorted on ``fixed_modes``
        keep_sorted: Leave the sorted intermediate inside the store

    Returns:
        The built store
    """
    fixed_modes = tuple(int(m) for m in fixed_modes)
    if len(fixed_modes) != coo.order - 2 or len(set(fixed_modes)) != len(fixed_modes):
        raise SliceStoreError(
            f"an order-{coo.order} store needs {coo.order - 2} distinct fixed modes, "
            f"got {fixed_modes}"
        )
    row_mode, col_mode = free_modes(coo.order, fixed_modes)
    dims = coo.dims
    rows, cols = dims[row_mode], dims[col_mode]
    fixed_sizes = [dims[m] for m in fixed_modes]
    num_slices = int(np.prod(fixed_sizes))
    slab_size = default_slab_size(dims, fixed_modes, coo.nnz) if slab_size is None else slab_size
    if slab_size < 1:
        raise SliceStoreError("slab_size must be >= 1")
    buffer_bytes = settings.SORT_BUFFER_BYTES if buffer_bytes is None else buffer_bytes

    final = Path(root)
    try:
        final.parent.mkdir(parents=True, exist_ok=True)
        root = Path(tempfile.mkdtemp(prefix=f".{final.name}.", dir=final.parent))
    except OSError as e:
        raise SliceStoreError(f"cannot create slice store {final}", str(e))

    try:
        if sorted_path is None:
            sorted_path = root / "sorted.txt"
            external_sort(coo, fixed_modes, sorted_path, buffer_bytes)
        sorted_path = Path(sorted_path)

        slabs: List[str] = []
        entries: List[SliceEntry] = []
        slab_file = None
        seen = 0

        def records_by_slice():
            with open(sorted_path, "r", encoding="utf-8") as f:
                for line_number, line in enumerate(f, start=1):
                    if line.strip():
                        record = parse_line(line, dims, line_number)
                        idx = [k - 1 for k in record.indices]
                        sid = int(
                            np.ravel_multi_index([idx[m] for m in fixed_modes], fixed_sizes)
                        )
                        yield sid, idx[row_mode], idx[col_mode], record.value

        def emit(matrix: SliceMatrix) -> None:
            nonlocal slab_file
            sid = len(entries)
            if sid % slab_size == 0:
                if slab_file is not None:
                    slab_file.close()
                slabs.append(f"slab_{len(slabs):06d}.tslc")
                slab_file = open(root / slabs[-1], "wb")
            raw = matrix.to_bytes()
            entries.append(
                SliceEntry(
                    slab=len(slabs) - 1, offset=slab_file.tell(), length=len(raw), nnz=matrix.nnz
                )
            )
            slab_file.write(raw)

        capacity = max(1, min(rows * cols, buffer_bytes // _RECORD_BYTES))
        r_buf, c_buf, v_buf = _record_buffers(capacity)
        try:
            current, fill = 0, 0
            previous_sid = -1
            for sid, r, c, v in records_by_slice():
                if sid < previous_sid:
                    raise SliceStoreError(f"{sorted_path} is not sorted on modes {fixed_modes}")
                previous_sid = sid
                seen += 1
                while current < sid:
                    emit(_slice_from_buffers(rows, cols, r_buf[:fill], c_buf[:fill], v_buf[:fill]))
                    current, fill = current + 1, 0
                if fill == v_buf.shape[0]:
                    logger.debug(f"Slice {sid} exceeds {fill} buffered records, growing")
                    grown = _record_buffers(2 * fill)
                    for new, old in zip(grown, (r_buf, c_buf, v_buf)):
                        new[:fill] = old
                    r_buf, c_buf, v_buf = grown
                r_buf[fill], c_buf[fill], v_buf[fill] = r, c, v
                fill += 1
            while current < num_slices:
                emit(_slice_from_buffers(rows, cols, r_buf[:fill], c_buf[:fill], v_buf[:fill]))
                current, fill = current + 1, 0
        except OSError as e:
            raise SliceStoreError(f"failed to write slice store in {final}", str(e))
        finally:
            if slab_file is not None:
                slab_file.close()
        del r_buf, c_buf, v_buf

        if seen != coo.nnz:
            raise SliceStoreError(f"sorted file has {seen} records, input has {coo.nnz}")

        manifest = StoreManifest(
            source=str(coo.path),
            source_sha256=file_sha256(coo.path),
            dims=dims,
            fixed_modes=fixed_modes,
            row_mode=row_mode,
            col_mode=col_mode,
            slab_size=slab_size,
            slabs=slabs,
            entries=entries,
        )
        (root / MANIFEST_NAME).write_text(manifest.model_dump_json(), encoding="utf-8")
        if not keep_sorted and sorted_path.parent == root:
            sorted_path.unlink(missing_ok=True)
        store = _publish(root, final, manifest)
    except BaseException:
        shutil.rmtree(root, ignore_errors=True)
        raise

    logger.info(
        f"Built store {final.name}: {num_slices} slices in {len(slabs)} slabs, "
        f"{store.empty_slices} empty"
    )
    return store


def _slice_from_buffers(rows, cols, r_buf, c_buf, v_buf) -> SliceMatrix:
    if len(v_buf) == 0:
        return SliceMatrix.empty(rows, cols)
    return SliceMatrix.from_triplets(rows, cols, r_buf, c_buf, v_buf)
