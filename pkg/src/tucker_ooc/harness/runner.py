"""Run one decomposition end to end and collect its metrics."""

import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..config import settings
from ..decomp import (
    ALGORITHMS,
    hooi,
    multislice_projection,
    required_stores,
    run_ho_svd,
    slice_projection,
)
from ..decomp.hosvd import model_fit
from ..memory import track_peak_bytes
from ..models import ConvergenceConfig, RunMetrics, RunResult, SliceStoreError, TuckerError
from ..storage import (
    CooFile,
    SliceStore,
    build_slice_store,
    load_coo,
    load_model,
    open_slice_store,
    parse_coo,
    save_model,
    store_dirname,
)
from ..storage.slices import file_sha256

logger = logging.getLogger("tucker_ooc.harness.runner")


def store_cache_dir(digest: str, work_dir=None) -> Path:
    """Cache directory for the stores of one input, keyed by its content hash."""
    return Path(settings.WORK_DIR if work_dir is None else work_dir) / digest[:16]


def prepare_stores(
    coo: CooFile,
    fixed_sets: Sequence[Sequence[int]],
    work_dir=None,
    slab_size: Optional[int] = None,
    buffer_bytes: Optional[int] = None,
) -> List[SliceStore]:
    """Open cached slice stores for ``coo`` or build the missing ones, one sort at a time.

    Stores with an explicit ``slab_size`` live in their own directories, so runs
    that differ only in slab size never replace a store another run is reading.
    """
    digest = file_sha256(coo.path)
    root = store_cache_dir(digest, work_dir)
    stores = []
    for fixed in fixed_sets:
        name = store_dirname(fixed)
        path = root / (name if slab_size is None else f"{name}_slab{slab_size}")
        try:
            store = open_slice_store(path)
            reusable = (
                store.manifest.source_sha256 == digest
                and tuple(store.dims) == tuple(coo.dims)
                and (slab_size is None or store.slab_size == slab_size)
            )
        except (SliceStoreError, ValueError):
            reusable = False
        if reusable:
            logger.info(f"Reusing slice store {path}")
        else:
            store = build_slice_store(
                coo, fixed, path, slab_size=slab_size, buffer_bytes=buffer_bytes
            )
        stores.append(store)
    return stores


def decompose(
    algorithm: str,
    coo: CooFile,
    core_dims: Sequence[int],
    cfg: Optional[ConvergenceConfig] = None,
    seed: int = 0,
    stores: Optional[Sequence[SliceStore]] = None,
    update_order: Optional[Sequence[int]] = None,
) -> RunResult:
    """Dispatch to one algorithm; in-RAM algorithms load the input here."""
    if algorithm == "hosvd":
        return run_ho_svd(load_coo(coo), core_dims)
    if algorithm == "hooi":
        return hooi(load_coo(coo), core_dims, cfg)
    if algorithm == "sp":
        return slice_projection(stores, core_dims, cfg, seed=seed, update_order=update_order)
    if algorithm == "mp":
        return multislice_projection(stores, core_dims, cfg)
    raise TuckerError(f"unknown algorithm {algorithm!r}", f"choose one of {', '.join(ALGORITHMS)}")


def run(
    algorithm: str,
    input_path,
    dims: Sequence[int],
    core_dims: Sequence[int],
    cfg: Optional[ConvergenceConfig] = None,
    seed: int = 0,
    out_path=None,
    sort_buffer_bytes: Optional[int] = None,
    slab_size: Optional[int] = None,
    work_dir=None,
    update_order: Optional[Sequence[int]] = None,
    coo: Optional[CooFile] = None,
) -> RunMetrics:
    """Decompose a coordinate file and write the model container.

    Slice stores for sp and mp are built (or reused from the cache) before the
    clock and the memory tracker start; their build time is reported
    separately. For hosvd and hooi, loading the input counts towards both.

    Args:
        algorithm: One of ``hosvd``, ``hooi``, ``sp``, ``mp``
        input_path: Coordinate-format input
        dims: Declared tensor dims
        core_dims: Target core dims
        cfg: Stopping rules
        seed: Seed of the SP random initialization
        out_path: Container destination (default ``<input>.<algorithm>.tkrd``)
        sort_buffer_bytes: External sort buffer (default from settings)
        slab_size: Slices per slab file
        work_dir: Slice store cache root
        update_order: SP factor update permutation (0-based)
        coo: Already parsed descriptor of ``input_path``

    Returns:
        RunMetrics of the run
    """
    if algorithm not in ALGORITHMS:
        raise TuckerError(
            f"unknown algorithm {algorithm!r}", f"choose one of {', '.join(ALGORITHMS)}"
        )
    cfg = cfg or ConvergenceConfig()
    coo = coo or parse_coo(input_path, dims)
    out_path = Path(out_path or coo.path.with_name(f"{coo.path.stem}.{algorithm}.tkrd"))

    stores = None
    build_seconds = 0.0
    buffer_bytes = 0
    if algorithm in ("sp", "mp"):
        buffer_bytes = sort_buffer_bytes or settings.SORT_BUFFER_BYTES
        started = time.perf_counter()
        stores = prepare_stores(
            coo,
            required_stores(coo.order, algorithm, update_order),
            work_dir,
            slab_size,
            buffer_bytes,
        )
        build_seconds = time.perf_counter() - started

    with track_peak_bytes() as tracker:
        started = time.perf_counter()
        result = decompose(algorithm, coo, core_dims, cfg, seed, stores, update_order)
        wall_seconds = time.perf_counter() - started

    output_bytes = save_model(result.model, out_path)
    metrics = RunMetrics(
        algorithm=algorithm,
        dims=coo.dims,
        core_dims=tuple(core_dims),
        density=coo.nnz / float(np.prod(coo.dims, dtype=np.float64)),
        nnz=coo.nnz,
        seed=seed,
        fit=result.final_fit,
        iterations=result.iterations,
        terminated_by=result.terminated_by,
        wall_seconds=wall_seconds,
        store_build_seconds=build_seconds,
        peak_bytes=tracker.peak,
        sort_buffer_bytes=buffer_bytes,
        input_bytes=coo.path.stat().st_size,
        output_bytes=output_bytes,
    )
    logger.info(
        f"{algorithm} on {coo.path.name}: fit {metrics.fit:.6f} after {metrics.iterations} "
        f"iterations, {wall_seconds:.3f}s, peak {tracker.peak} bytes"
    )
    return metrics


def inspect_model(
    model_path, input_path=None, dims: Optional[Sequence[int]] = None
) -> Dict[str, Any]:
    """Summarize a container, and its fit against an input when one is given."""
    model = load_model(model_path)
    summary: Dict[str, Any] = {
        "dims": list(model.dims),
        "core_dims": list(model.core_dims),
        "orthonormality_error": model.orthonormality_error(),
        "core_norm": float(np.linalg.norm(model.core)),
    }
    if input_path is not None:
        coo = parse_coo(input_path, dims or model.dims)
        summary["fit"] = model_fit(load_coo(coo), model)
    return summary
