"""Higher-order SVD for in-RAM tensors."""

import logging
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import settings
from ..linalg import leading_eigenpairs
from ..memory import account
from ..models import DimensionError, RunResult, TuckerModel, ZeroNormError
from ..tensor import SparseTensor, check_mode, frobenius_norm, matricize, n_mode_product
from .convergence import check_core_dims

logger = logging.getLogger("tucker_ooc.decomp.hosvd")

Tensor = Union[np.ndarray, SparseTensor]


def tensor_norm(x: Tensor) -> float:
    return x.norm() if isinstance(x, SparseTensor) else frobenius_norm(x)


def tensor_dims(x: Tensor) -> Tuple[int, ...]:
    return x.dims if isinstance(x, SparseTensor) else tuple(x.shape)


def unfolding_gram(x: Tensor, n: int) -> np.ndarray:
    """``X_(n) X_(n)ᵀ``; the sparse path never densifies x."""
    if isinstance(x, SparseTensor):
        xm = x.matricize(n)
        return account((xm @ xm.T).toarray())
    check_mode(x.ndim, n)
    xm = matricize(x, n)
    return account(xm @ xm.T)


def project(x: Tensor, matrices: Dict[int, np.ndarray]) -> np.ndarray:
    """Apply ``x ×_m matrices[m]`` for every listed mode, ascending.

    A sparse x is multiplied on its first listed mode straight from the
    unfolding; the remaining products are dense and already small.
    """
    modes = sorted(matrices)
    if not modes:
        return x.to_dense() if isinstance(x, SparseTensor) else x
    if isinstance(x, SparseTensor):
        y = x.mode_product(matrices[modes[0]], modes[0])
        modes = modes[1:]
    else:
        y = x
    for m in modes:
        y = n_mode_product(y, matrices[m], m)
    return y


def leading_factors(
    x: Tensor, core_dims: Sequence[int], modes: Iterable[int], square: Optional[bool] = None
) -> Tuple[Dict[int, np.ndarray], List[int]]:
    """HO-SVD factors for the requested modes, plus the modes that needed completion."""
    square = settings.SQUARE_GRAM if square is None else square
    factors = {}
    deficient = []
    for n in modes:
        result = leading_eigenpairs(unfolding_gram(x, n), core_dims[n], square)
        if result.rank_deficient:
            logger.warning(f"Mode {n} has rank below {core_dims[n]}; basis was completed")
            deficient.append(n)
        factors[n] = result.vectors
    return factors, deficient


def fit_from_core(norm_x: float, core: np.ndarray) -> float:
    """Fit of ``[[G; A...]]`` when ``G = [[x; Aᵀ...]]`` and the factors are orthonormal.

    Then ``<x, x̂> = ||G||²`` and ``||x - x̂||² = ||x||² - ||G||²``; rounding can
    push the difference slightly negative, so it is clamped at zero.
    """
    if norm_x == 0.0:
        raise ZeroNormError("fit is undefined for an all-zero tensor")
    residual_sq = max(norm_x * norm_x - frobenius_norm(core) ** 2, 0.0)
    return 1.0 - float(np.sqrt(residual_sq)) / norm_x


def model_fit(x: Tensor, model: TuckerModel) -> float:
    """Fit of any model with orthonormal factors against x, without forming x̂.

    Uses ``||x̂|| = ||G||`` and ``<x, x̂> = <[[x; A1ᵀ, ..., ANᵀ]], G>``.
    """
    norm_x = tensor_norm(x)
    if norm_x == 0.0:
        raise ZeroNormError("fit is undefined for an all-zero tensor")
    if tuple(tensor_dims(x)) != model.dims:
        raise DimensionError(f"model dims {model.dims} do not match tensor dims {tensor_dims(x)}")
    projected = project(x, {n: f.T for n, f in enumerate(model.factors)})
    inner = float(np.sum(projected * model.core))
    residual_sq = max(norm_x * norm_x - 2.0 * inner + frobenius_norm(model.core) ** 2, 0.0)
    return 1.0 - float(np.sqrt(residual_sq)) / norm_x


def _ho_svd(
    x: Tensor, core_dims: Sequence[int], square: Optional[bool]
) -> Tuple[TuckerModel, List[int]]:
    dims = tensor_dims(x)
    core_dims = check_core_dims(dims, core_dims)
    if tensor_norm(x) == 0.0:
        raise ZeroNormError("cannot decompose an all-zero tensor")
    by_mode, deficient = leading_factors(x, core_dims, range(len(dims)), square)
    factors = [by_mode[n] for n in range(len(dims))]
    core = project(x, {n: f.T for n, f in enumerate(factors)})
    logger.info(f"HO-SVD of {dims} into core {core_dims}")
    return TuckerModel(core=np.ascontiguousarray(core), factors=factors), deficient


def ho_svd(x: Tensor, core_dims: Sequence[int], square: Optional[bool] = None) -> TuckerModel:
    """Non-iterative Tucker decomposition.

    Factor n holds the leading ``core_dims[n]`` eigenvectors of ``X_(n) X_(n)ᵀ``
    and the core is ``[[x; A1ᵀ, ..., ANᵀ]]``.

    Args:
        x: Dense array or SparseTensor of order 2 to 4
        core_dims: Target core dims
        square: Eigendecompose ``M Mᵀ`` (default ``settings.SQUARE_GRAM``)

    Returns:
        TuckerModel with orthonormal factors

    Raises:
        DimensionError: If a core dim exceeds its tensor dim
        ZeroNormError: If x is all zero
    """
    return _ho_svd(x, core_dims, square)[0]


def run_ho_svd(x: Tensor, core_dims: Sequence[int], square: Optional[bool] = None) -> RunResult:
    """:func:`ho_svd` as a single-pass run carrying its exact fit."""
    model, deficient = _ho_svd(x, core_dims, square)
    fit = fit_from_core(tensor_norm(x), model.core)
    return RunResult(
        model=model,
        fit_history=[fit],
        iterations=1,
        terminated_by="single_pass",
        final_fit=fit,
        flags={"rank_deficient_modes": deficient},
    )
