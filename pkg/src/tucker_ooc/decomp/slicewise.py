"""Gram matrices, cores and fits computed one slice at a time from slice stores."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..config import settings
from ..memory import account
from ..models import DimensionError, TuckerModel, ZeroNormError
from ..storage.slices import SliceMatrix, SliceStore
from ..tensor import n_mode_product

logger = logging.getLogger("tucker_ooc.decomp.slicewise")


def _check_factors(store: SliceStore, factors: Sequence[np.ndarray]) -> None:
    if len(factors) != len(store.dims):
        raise DimensionError(f"expected {len(store.dims)} factors, got {len(factors)}")
    for n, factor in enumerate(factors):
        if factor is not None and (factor.ndim != 2 or factor.shape[0] != store.dims[n]):
            raise DimensionError(
                f"factor {n} has shape {factor.shape}, mode size is {store.dims[n]}"
            )


def _slice_index(store: SliceStore, i: int) -> Tuple:
    """Index selecting the free-mode block of slice ``i`` in an order-N array."""
    index: List = [slice(None)] * len(store.dims)
    for mode, k in zip(store.fixed_modes, store.fixed_index(i)):
        index[mode] = k
    return tuple(index)


def _accumulate(
    slices: Iterable[Tuple[int, SliceMatrix]],
    gram: np.ndarray,
    on_rows: bool,
    factor: Optional[np.ndarray],
) -> np.ndarray:
    for _, s in slices:
        if s.nnz == 0:
            continue
        mat = s.to_scipy() if on_rows else s.to_scipy().T.tocsr()
        if factor is None:
            gram += (mat @ mat.T).toarray()
        else:
            p = account(np.asarray(mat @ factor))
            gram += p @ p.T
    return gram


def _chunks(count: int, parts: int) -> Iterator[Tuple[int, int]]:
    step = -(-count // parts)
    for start in range(0, count, step):
        yield start, min(start + step, count)


def slice_gram(
    store: SliceStore,
    target: int,
    factor: Optional[np.ndarray] = None,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Sum of per-slice Gram matrices for mode ``target``.

    With ``S`` the slice oriented so that ``target`` indexes its rows, this is
    ``sum_i S_i F Fᵀ S_iᵀ`` when ``factor`` F is given (F projects the other
    free mode) and ``sum_i S_i S_iᵀ`` otherwise.

    Args:
        store: Store whose free modes include ``target``
        target: Mode the Gram matrix is built for
        factor: Factor of the other free mode, or None for the unprojected sum
        workers: Threads for the reduction (default ``settings.GRAM_WORKERS``);
            partial sums are combined in slice order so results depend only on
            the worker count

    Returns:
        Symmetric ``I_target x I_target`` matrix
    """
    if target not in (store.row_mode, store.col_mode):
        raise DimensionError(
            f"mode {target} is fixed in store {store.fixed_modes}, cannot build its Gram matrix"
        )
    on_rows = target == store.row_mode
    other = store.col_mode if on_rows else store.row_mode
    if factor is not None and (factor.ndim != 2 or factor.shape[0] != store.dims[other]):
        raise DimensionError(
            f"projection factor of shape {factor.shape} does not match mode {other} "
            f"of size {store.dims[other]}"
        )
    size = store.dims[target]
    workers = settings.GRAM_WORKERS if workers is None else workers

    if workers <= 1 or len(store) < 2:
        gram = account(np.zeros((size, size)))
        return _accumulate(store, gram, on_rows, factor)

    ranges = list(_chunks(len(store), workers))
    logger.debug(f"Gram for mode {target} over {len(ranges)} slice ranges")

    def partial(bounds: Tuple[int, int]) -> np.ndarray:
        gram = account(np.zeros((size, size)))
        return _accumulate(store.iter_range(*bounds), gram, on_rows, factor)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(pool.map(partial, ranges))
    gram = partials[0]
    for p in partials[1:]:
        gram += p
    return gram


def core_from_slices(store: SliceStore, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Core ``[[x; A1ᵀ, ..., ANᵀ]]`` accumulated slice by slice.

    Each slice is projected on its free modes into a partial tensor that keeps
    the fixed modes at full size; the fixed modes are projected last.
    """
    _check_factors(store, factors)
    dims = store.dims
    r, c = store.row_mode, store.col_mode
    free = (r, c)
    shape = [factors[n].shape[1] if n in free else dims[n] for n in range(len(dims))]
    partial = account(np.zeros(shape))
    a_r, a_c = factors[r], factors[c]
    for i, s in store:
        if s.nnz:
            partial[_slice_index(store, i)] = a_r.T @ np.asarray(s.to_scipy() @ a_c)
    core = partial
    for m in store.fixed_modes:
        core = n_mode_product(core, factors[m].T, m)
    return core


def fit_from_slices(store: SliceStore, model: TuckerModel) -> float:
    """Fit ``1 - ||x - x̂|| / ||x||`` with x streamed one slice at a time.

    Raises:
        ZeroNormError: If every slice is empty
    """
    if model.dims != tuple(store.dims):
        raise DimensionError(f"model dims {model.dims} do not match store dims {store.dims}")
    factors = model.factors
    expanded = model.core
    for m in store.fixed_modes:
        expanded = n_mode_product(expanded, factors[m], m)
    a_r, a_c = factors[store.row_mode], factors[store.col_mode]

    sqerr = 0.0
    norm_sq = 0.0
    for i, s in store:
        approx = account(a_r @ expanded[_slice_index(store, i)] @ a_c.T)
        if s.nnz:
            approx[s.row_indices(), s.indices] -= s.data
            norm_sq += s.frobenius_sq()
        sqerr += float(np.vdot(approx, approx))
    if norm_sq == 0.0:
        raise ZeroNormError("fit is undefined for an all-zero tensor")
    return 1.0 - math.sqrt(sqerr) / math.sqrt(norm_sq)


def norm_from_slices(store: SliceStore) -> float:
    """Frobenius norm of the stored tensor."""
    return math.sqrt(sum(s.frobenius_sq() for _, s in store))
