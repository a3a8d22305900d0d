"""Slice Projection and Multislice Projection: ALS driven from slice stores.

Neither driver loads the input tensor. Every Gram matrix, core and fit is
accumulated from slices streamed off disk.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import settings
from ..linalg import leading_eigenpairs
from ..models import ConvergenceConfig, RunResult, SliceStoreError, TuckerModel
from ..storage.slices import SliceStore, store_dirname
from ..tensor import frobenius_norm, other_modes
from .convergence import check_core_dims, delta_core_growth, delta_fit
from .slicewise import core_from_slices, fit_from_slices, slice_gram

logger = logging.getLogger("tucker_ooc.decomp.projection")

FixedModes = Tuple[int, ...]


@dataclass
class StepEvent:
    """One intermediate result, handed to an observer.

    ``kind`` is ``"init_gram"`` or ``"gram"`` (``value`` is the Gram matrix
    for ``mode``), ``"core"`` (``value`` is the core) or ``"fit"`` (``value``
    is the slice-wise fit). ``factors`` is a snapshot of the factors in effect
    when the value was computed; modes not yet computed are None.
    """

    kind: Literal["init_gram", "gram", "core", "fit"]
    iteration: int
    mode: Optional[int]
    value: Union[np.ndarray, float]
    factors: List[Optional[np.ndarray]]


Observer = Callable[[StepEvent], None]


def _fixed_for(order: int, free: Iterable[int]) -> FixedModes:
    return tuple(m for m in range(order) if m not in set(free))


def _check_projection_order(order: int) -> None:
    if order not in (3, 4):
        raise SliceStoreError(f"slice projection needs a tensor of order 3 or 4, got {order}")


def check_update_order(order: int, update_order: Optional[Sequence[int]]) -> Tuple[int, ...]:
    if update_order is None:
        return tuple(range(order))
    update_order = tuple(int(n) for n in update_order)
    if sorted(update_order) != list(range(order)):
        raise ValueError(f"update order {update_order} is not a permutation of 0..{order - 1}")
    return update_order


def sp_plan(order: int, update_order: Optional[Sequence[int]] = None):
    """``(target, projected, fixed_modes)`` for each SP update, in sweep order.

    Each factor is projected with the one updated just before it; the first
    update wraps around to the last, which is the randomly initialized factor.
    """
    _check_projection_order(order)
    sequence = check_update_order(order, update_order)
    return [
        (n, sequence[k - 1], _fixed_for(order, (n, sequence[k - 1])))
        for k, n in enumerate(sequence)
    ]


def mp_plan(order: int, n: int) -> List[Tuple[int, FixedModes]]:
    """``(projected, fixed_modes)`` for every store contributing to M_n."""
    _check_projection_order(order)
    return [(q, _fixed_for(order, (n, q))) for q in other_modes(order, n)]


def core_store_modes(order: int) -> FixedModes:
    """Store used for the core and the fit: slices on mode 1 (order 3) or modes 1, 2."""
    return tuple(range(order - 2))


def required_stores(
    order: int, algorithm: str, update_order: Optional[Sequence[int]] = None
) -> List[FixedModes]:
    """Fixed-mode sets the algorithm streams, sorted.

    Args:
        order: Tensor order (3 or 4)
        algorithm: ``"sp"`` or ``"mp"``
        update_order: SP factor update permutation

    Returns:
        Distinct fixed-mode tuples, ascending
    """
    _check_projection_order(order)
    if algorithm == "sp":
        needed = {fixed for _, _, fixed in sp_plan(order, update_order)}
    elif algorithm == "mp":
        needed = {fixed for n in range(order) for _, fixed in mp_plan(order, n)}
    else:
        raise ValueError(f"algorithm {algorithm!r} does not use slice stores")
    needed.add(core_store_modes(order))
    return sorted(needed)


def _index_stores(stores: Iterable[SliceStore]) -> Tuple[Dict[FixedModes, SliceStore], tuple]:
    by_modes: Dict[FixedModes, SliceStore] = {}
    dims = None
    for store in stores:
        if dims is None:
            dims = tuple(store.dims)
        elif tuple(store.dims) != dims:
            raise SliceStoreError(f"stores disagree on dims: {dims} vs {tuple(store.dims)}")
        by_modes[tuple(sorted(store.fixed_modes))] = store
    if dims is None:
        raise SliceStoreError("no slice stores given")
    return by_modes, dims


def _lookup(stores: Dict[FixedModes, SliceStore], fixed: FixedModes) -> SliceStore:
    try:
        return stores[fixed]
    except KeyError:
        raise SliceStoreError(
            f"missing slice store {store_dirname(fixed)}",
            f"available: {sorted(store_dirname(k) for k in stores)}",
        )


def _snapshot(factors: Sequence[Optional[np.ndarray]]) -> List[Optional[np.ndarray]]:
    return [None if f is None else f.copy() for f in factors]


def _empty_slice_flags(stores: Iterable[SliceStore]) -> Dict[str, int]:
    return {store_dirname(s.fixed_modes): s.empty_slices for s in stores if s.empty_slices}


def _eig(gram: np.ndarray, k: int, square: bool, mode: int, deficient: set) -> np.ndarray:
    result = leading_eigenpairs(gram, k, square)
    if result.rank_deficient:
        logger.warning(f"Mode {mode} Gram matrix has rank below {k}; basis was completed")
        deficient.add(mode)
    return result.vectors


def slice_projection(
    stores: Iterable[SliceStore],
    core_dims: Sequence[int],
    cfg: Optional[ConvergenceConfig] = None,
    seed: int = 0,
    update_order: Optional[Sequence[int]] = None,
    observer: Optional[Observer] = None,
    square: Optional[bool] = None,
) -> RunResult:
    """Slice Projection.

    The last factor of the update order starts as uniform [0, 1) entries with
    unit-norm columns. Each update builds ``M = sum_i S_i F Fᵀ S_iᵀ`` from the
    slices that keep the target mode and the mode of the previously updated
    factor F, and takes its leading eigenvectors. After each sweep the core is
    recomputed slice-wise; the loop stops once the core stops growing.

    Args:
        stores: Slice stores covering :func:`required_stores` for ``"sp"``
        core_dims: Target core dims
        cfg: Stopping rules (defaults from settings)
        seed: Seed of the random initial factor
        update_order: Permutation of modes; default is mode order
        observer: Receives every Gram matrix and core as it is computed
        square: Eigendecompose ``M Mᵀ`` (default ``settings.SQUARE_GRAM``)

    Returns:
        RunResult whose fit_history holds the core growth per iteration and
        whose final_fit is computed slice-wise
    """
    cfg = cfg or ConvergenceConfig()
    square = settings.SQUARE_GRAM if square is None else square
    by_modes, dims = _index_stores(stores)
    order = len(dims)
    plan = sp_plan(order, update_order)
    core_dims = check_core_dims(dims, core_dims)
    used = [_lookup(by_modes, fixed) for _, _, fixed in plan]
    core_store = _lookup(by_modes, core_store_modes(order))

    factors: List[Optional[np.ndarray]] = [None] * order
    last = plan[-1][0]
    rng = np.random.default_rng(seed)
    initial = rng.random((dims[last], core_dims[last]))
    factors[last] = initial / np.linalg.norm(initial, axis=0)

    deficient: set = set()
    history = []
    terminated_by = "max_iterations"
    previous_norm = 0.0
    core = None
    for iteration in range(1, cfg.max_iterations + 1):
        for (n, projected, _), store in zip(plan, used):
            gram = slice_gram(store, n, factors[projected])
            if observer:
                observer(StepEvent("gram", iteration, n, gram, _snapshot(factors)))
            factors[n] = _eig(gram, core_dims[n], square, n, deficient)
        core = core_from_slices(core_store, factors)
        if observer:
            observer(StepEvent("core", iteration, None, core, _snapshot(factors)))
        norm = frobenius_norm(core)
        growth = delta_core_growth(previous_norm, norm)
        history.append(growth)
        logger.info(f"SP iteration {iteration}: core growth {growth:.3e}")
        if growth < cfg.core_growth_threshold:
            terminated_by = "threshold"
            break
        previous_norm = norm

    model = TuckerModel(core=core, factors=factors)
    final_fit = fit_from_slices(core_store, model)
    logger.info(f"SP finished after {len(history)} iterations, fit {final_fit:.10f}")
    return RunResult(
        model=model,
        fit_history=history,
        iterations=len(history),
        terminated_by=terminated_by,
        final_fit=final_fit,
        flags={
            "rank_deficient_modes": sorted(deficient),
            "empty_slices": _empty_slice_flags(used + [core_store]),
            "update_order": [n for n, _, _ in plan],
        },
    )


def multislice_gram(
    stores: Dict[FixedModes, SliceStore],
    n: int,
    factors: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> np.ndarray:
    """``M_n`` summed over every store whose slices keep mode n.

    With ``factors`` each store projects its other free mode with the current
    factor; without, the plain slice Grams are summed (pseudo HO-SVD).
    """
    order = len(next(iter(stores.values())).dims)
    gram = None
    for projected, fixed in mp_plan(order, n):
        factor = None if factors is None else factors[projected]
        part = slice_gram(_lookup(stores, fixed), n, factor)
        if gram is None:
            gram = part
        else:
            gram += part
    return gram


def multislice_projection(
    stores: Iterable[SliceStore],
    core_dims: Sequence[int],
    cfg: Optional[ConvergenceConfig] = None,
    observer: Optional[Observer] = None,
    square: Optional[bool] = None,
) -> RunResult:
    """Multislice Projection.

    Factors 2..N start from the pseudo HO-SVD: the leading eigenvectors of the
    summed slice Grams of every store that keeps the mode. Each update sums
    ``S_i F_q F_qᵀ S_iᵀ`` over the stores keeping the target mode and a second
    mode q, with F_q the current factor of q. After each sweep the core and
    the fit are computed slice-wise; the loop stops once the fit improves by
    less than ``cfg.fit_threshold``.

    Args:
        stores: Slice stores covering :func:`required_stores` for ``"mp"``
        core_dims: Target core dims
        cfg: Stopping rules (defaults from settings)
        observer: Receives every Gram matrix, core and fit as it is computed
        square: Eigendecompose ``M Mᵀ`` (default ``settings.SQUARE_GRAM``)

    Returns:
        RunResult whose fit_history holds the fit after each iteration
    """
    cfg = cfg or ConvergenceConfig()
    square = settings.SQUARE_GRAM if square is None else square
    stores = list(stores)
    by_modes, dims = _index_stores(stores)
    order = len(dims)
    core_dims = check_core_dims(dims, core_dims)
    used = [_lookup(by_modes, fixed) for fixed in required_stores(order, "mp")]
    core_store = _lookup(by_modes, core_store_modes(order))

    factors: List[Optional[np.ndarray]] = [None] * order
    deficient: set = set()
    for n in range(1, order):
        gram = multislice_gram(by_modes, n)
        if observer:
            observer(StepEvent("init_gram", 0, n, gram, _snapshot(factors)))
        factors[n] = _eig(gram, core_dims[n], square, n, deficient)

    history = []
    terminated_by = "max_iterations"
    previous_fit = 0.0
    core = None
    for iteration in range(1, cfg.max_iterations + 1):
        for n in range(order):
            gram = multislice_gram(by_modes, n, factors)
            if observer:
                observer(StepEvent("gram", iteration, n, gram, _snapshot(factors)))
            factors[n] = _eig(gram, core_dims[n], square, n, deficient)
        core = core_from_slices(core_store, factors)
        if observer:
            observer(StepEvent("core", iteration, None, core, _snapshot(factors)))
        fit = fit_from_slices(core_store, TuckerModel(core=core, factors=factors))
        if observer:
            observer(StepEvent("fit", iteration, None, fit, _snapshot(factors)))
        history.append(fit)
        logger.info(f"MP iteration {iteration}: fit {fit:.10f}")
        if delta_fit(previous_fit, fit) < cfg.fit_threshold:
            terminated_by = "threshold"
            break
        previous_fit = fit

    return RunResult(
        model=TuckerModel(core=core, factors=factors),
        fit_history=history,
        iterations=len(history),
        terminated_by=terminated_by,
        final_fit=history[-1],
        flags={
            "rank_deficient_modes": sorted(deficient),
            "empty_slices": _empty_slice_flags(used),
        },
    )
