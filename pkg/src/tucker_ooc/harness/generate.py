"""Random sparse tensor files."""

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from ..models import TuckerError
from ..storage.coo import CooFile
from ..tensor import check_order

logger = logging.getLogger("tucker_ooc.harness.generate")


def gen_random_tensor(dims: Sequence[int], density: float, seed: int, out_path) -> CooFile:
    """Write a random sparse tensor in coordinate format.

    Every cell is kept independently with probability ``density`` and given a
    value uniform on [0, 1). Cells are visited with the last index varying
    fastest, one first-mode slab at a time, so the dense tensor is never held
    in memory.

    Args:
        dims: Tensor dims (order 2 to 4)
        density: Inclusion probability, ``0 < density <= 1``
        seed: Generator seed; equal seeds give byte-identical files
        out_path: Destination file

    Returns:
        CooFile describing the written file
    """
    dims = tuple(int(d) for d in dims)
    check_order(len(dims))
    if any(d < 1 for d in dims):
        raise TuckerError(f"tensor dims must be positive, got {dims}")
    if not 0.0 < density <= 1.0:
        raise TuckerError(f"density must be in (0, 1], got {density}")

    out_path = Path(out_path)
    rng = np.random.default_rng(seed)
    nnz = 0
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            for i in range(dims[0]):
                keep = rng.random(dims[1:]) < density
                values = rng.random(dims[1:])
                for idx in np.argwhere(keep):
                    coords = " ".join(str(int(k) + 1) for k in idx)
                    f.write(f"{i + 1} {coords} {float(values[tuple(idx)])!r}\n")
                nnz += int(keep.sum())
    except OSError as e:
        raise TuckerError(f"cannot write {out_path}", str(e))

    logger.info(f"Generated {out_path}: dims={dims}, density={density}, seed={seed}, nnz={nnz}")
    return CooFile(path=out_path, dims=dims, nnz=nnz)
