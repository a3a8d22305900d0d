"""Coordinate-format tensor files: one nonzero per line.

Each line holds N whitespace-separated 1-based integer indices followed by one
decimal real, e.g. ``3 1 7 0.25``. LF and CRLF line endings are accepted.
"""

import logging
import math
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator

from ..models import CooFormatError, DimensionError
from ..tensor import SparseTensor, check_order

logger = logging.getLogger("tucker_ooc.storage.coo")


class CooRecord(NamedTuple):
    """One parsed line; ``indices`` stay 1-based like the file."""

    indices: Tuple[int, ...]
    value: float


class CooFile(BaseModel):
    """Validated descriptor of a coordinate-format tensor file."""

    path: Path
    dims: Tuple[int, ...]
    nnz: int

    @field_validator("dims")
    def validate_dims(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        check_order(len(v))
        if any(d < 1 for d in v):
            raise ValueError("tensor dimensions must be positive")
        return v

    @property
    def order(self) -> int:
        return len(self.dims)


def parse_line(line: str, dims: Sequence[int], line_number: int) -> CooRecord:
    """Parse and range-check one line."""
    tokens = line.split()
    if len(tokens) != len(dims) + 1:
        raise CooFormatError(
            f"expected {len(dims) + 1} fields, found {len(tokens)}", line_number
        )
    try:
        indices = tuple(int(t) for t in tokens[:-1])
        value = float(tokens[-1])
    except ValueError:
        raise CooFormatError(f"non-numeric token in {line.strip()!r}", line_number)
    if not math.isfinite(value):
        raise CooFormatError(f"value {tokens[-1]} is not finite", line_number)
    for mode, (index, size) in enumerate(zip(indices, dims)):
        if not 1 <= index <= size:
            raise CooFormatError(
                f"index {index} out of range for mode {mode + 1} of size {size}", line_number
            )
    return CooRecord(indices, value)


def iter_records(path: Path, dims: Sequence[int]) -> Iterator[CooRecord]:
    """Stream records from a file, skipping blank lines."""
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line.strip():
                yield parse_line(line, dims, line_number)


def parse_coo(path, dims: Sequence[int], check_duplicates: bool = True) -> CooFile:
    """Scan and validate a coordinate file.

    Args:
        path: Input text file
        dims: Declared tensor dimensions
        check_duplicates: Reject repeated coordinates (keeps one key per nonzero in RAM)

    Returns:
        CooFile with the nonzero count

    Raises:
        CooFormatError: On the first malformed, out-of-range or duplicate line
    """
    path = Path(path)
    dims = tuple(int(d) for d in dims)
    if not path.is_file():
        raise CooFormatError(f"input file {path} does not exist", 0)

    strides = np.cumprod((1,) + dims[:-1], dtype=np.int64)
    keys = []
    line_numbers = []
    nnz = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = parse_line(line, dims, line_number)
            nnz += 1
            if check_duplicates:
                keys.append(sum((i - 1) * int(s) for i, s in zip(record.indices, strides)))
                line_numbers.append(line_number)

    if check_duplicates and keys:
        keys_arr = np.asarray(keys, dtype=np.int64)
        order = np.argsort(keys_arr, kind="stable")
        repeated = np.nonzero(np.diff(keys_arr[order]) == 0)[0]
        if repeated.size:
            first = line_numbers[order[repeated[0] + 1]]
            original = line_numbers[order[repeated[0]]]
            raise CooFormatError(f"duplicate coordinates (first seen on line {original})", first)

    logger.info(f"Parsed {path}: dims={dims}, nnz={nnz}")
    return CooFile(path=path, dims=dims, nnz=nnz)


def load_coo(coo: CooFile) -> SparseTensor:
    """Read a validated file into RAM; explicit zeros are dropped."""
    indices = np.empty((coo.nnz, coo.order), dtype=np.int64)
    values = np.empty(coo.nnz, dtype=np.float64)
    count = 0
    for record in iter_records(coo.path, coo.dims):
        if count >= coo.nnz:
            raise DimensionError(f"{coo.path} changed since it was parsed")
        indices[count] = record.indices
        values[count] = record.value
        count += 1
    keep = values[:count] != 0.0
    return SparseTensor(coo.dims, indices[:count][keep] - 1, values[:count][keep])


def write_coo(tensor: SparseTensor, path) -> CooFile:
    """Write an in-RAM tensor in the text format (values round-trip exactly)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for idx, value in zip(tensor.indices, tensor.values):
            f.write(" ".join(str(int(i) + 1) for i in idx) + f" {float(value)!r}\n")
    return CooFile(path=path, dims=tensor.dims, nnz=tensor.nnz)
