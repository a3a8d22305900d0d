"""External merge sort of coordinate files by one or more index columns.

Equivalent to ``sort -n -s -k p,p [-k q,q]``: keys are numeric, ties keep
their input order. Runs of at most ``buffer_bytes`` of line data are sorted in
memory, spilled to temporary files, then merged k-way with ``heapq.merge``
(stable across runs because runs are produced in input order).
"""

import heapq
import logging
import os
import shutil
import sys
import tempfile
from contextlib import ExitStack
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

from ..config import MIN_SORT_BUFFER_BYTES, settings
from ..memory import charge
from ..models import CooFormatError, SliceStoreError, TuckerError
from .coo import CooFile

logger = logging.getLogger("tucker_ooc.storage.extsort")


@dataclass
class SortResult:
    """Sorted output file plus run statistics."""

    path: Path
    records: int
    runs: int
    modes: Tuple[int, ...]


def _key_function(modes: Sequence[int], order: int) -> Callable[[str], Tuple[int, ...]]:
    def key(line: str) -> Tuple[int, ...]:
        tokens = line.split()
        return tuple(int(tokens[m]) for m in modes)

    return key


def _line_bytes(line: str) -> int:
    # In-memory footprint of the buffered line, not its length on disk.
    return sys.getsizeof(line)


def _spill(run: List[str], key, tmp_dir: str, run_files: List[str]) -> None:
    run.sort(key=key)
    fd, name = tempfile.mkstemp(prefix="run_", suffix=".txt", dir=tmp_dir)
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(run)
    run_files.append(name)
    logger.debug(f"Spilled run {len(run_files)} with {len(run)} records")


def _check_disk(target: Path, needed: int) -> None:
    free = shutil.disk_usage(target).free
    if free < needed:
        raise TuckerError(
            "insufficient disk space for external sort",
            f"need about {needed} bytes in {target}, {free} available",
        )


def external_sort(
    coo: CooFile,
    modes: Sequence[int],
    out_path,
    buffer_bytes: Optional[int] = None,
) -> SortResult:
    """Stable numeric sort of ``coo`` on the given 0-based index columns.

    Args:
        coo: Validated input file (left unmodified)
        modes: Key columns, most significant first
        out_path: Destination of the sorted text file
        buffer_bytes: In-memory run size (defaults to ``settings.SORT_BUFFER_BYTES``)

    Returns:
        SortResult with record and run counts
    """
    buffer_bytes = settings.SORT_BUFFER_BYTES if buffer_bytes is None else buffer_bytes
    if buffer_bytes < MIN_SORT_BUFFER_BYTES:
        raise TuckerError(
            f"sort buffer of {buffer_bytes} bytes is below the minimum of "
            f"{MIN_SORT_BUFFER_BYTES} bytes"
        )
    modes = tuple(int(m) for m in modes)
    for m in modes:
        if not 0 <= m < coo.order:
            raise SliceStoreError(f"sort key mode {m} is out of range for order {coo.order}")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    input_size = coo.path.stat().st_size
    _check_disk(out_path.parent, 2 * input_size)

    key = _key_function(modes, coo.order)
    run_files: List[str] = []
    records = 0
    tmp_dir = tempfile.mkdtemp(prefix="extsort_", dir=out_path.parent)
    try:
        with charge(buffer_bytes):
            run: List[str] = []
            used = 0
            with open(coo.path, "r", encoding="utf-8") as f:
                for line_number, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    line = line.rstrip("\r\n") + "\n"
                    try:
                        key(line)
                    except (ValueError, IndexError):
                        raise CooFormatError(f"unparseable line {line.strip()!r}", line_number)
                    size = _line_bytes(line)
                    if run and used + size > buffer_bytes:
                        _spill(run, key, tmp_dir, run_files)
                        run, used = [], 0
                    run.append(line)
                    used += size
                    records += 1
            if run:
                _spill(run, key, tmp_dir, run_files)
            del run

        with ExitStack() as stack, open(out_path, "w", encoding="utf-8", newline="\n") as out:
            handles = [stack.enter_context(open(name, "r", encoding="utf-8")) for name in run_files]
            out.writelines(heapq.merge(*handles, key=key))
    except OSError as e:
        raise TuckerError("external sort failed", str(e))
    finally:
        shutil.rmtree(tmp_dir, ignore_errors=True)

    logger.info(
        f"Sorted {records} records of {coo.path} on modes {[m + 1 for m in modes]} "
        f"using {len(run_files)} runs"
    )
    return SortResult(path=out_path, records=records, runs=len(run_files), modes=modes)


def external_sort_by_mode(coo: CooFile, n: int, out_path, buffer_bytes: Optional[int] = None):
    """Single-key form of :func:`external_sort` (``sort -n -s -k n,n``)."""
    return external_sort(coo, (n,), out_path, buffer_bytes)


def system_sort_command(input_path, out_path, modes: Sequence[int], buffer_bytes: int) -> str:
    """Equivalent Unix ``sort`` invocation, for cross-checking against this sorter."""
    keys = " ".join(f"-k {m + 1},{m + 1}" for m in modes)
    return f"sort -n -s -S {buffer_bytes // 1024}K {keys} -o {out_path} {input_path}"
