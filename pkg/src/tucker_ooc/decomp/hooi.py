"""Higher-order orthogonal iteration (ALS) for in-RAM tensors."""

import logging
from typing import Literal, Optional, Sequence

import numpy as np

from ..config import settings
from ..linalg import leading_eigenpairs
from ..memory import account
from ..models import ConvergenceConfig, RunResult, TuckerModel, ZeroNormError
from ..tensor import n_mode_product, other_modes, random_orthonormal
from .convergence import check_core_dims, delta_fit
from .hosvd import Tensor, fit_from_core, leading_factors, project, tensor_dims, tensor_norm

logger = logging.getLogger("tucker_ooc.decomp.hooi")


def hooi(
    x: Tensor,
    core_dims: Sequence[int],
    cfg: Optional[ConvergenceConfig] = None,
    init: Literal["hosvd", "random"] = "hosvd",
    seed: int = 0,
    square: Optional[bool] = None,
) -> RunResult:
    """Tucker decomposition by alternating least squares over all modes.

    Factors 2..N are initialized (factor 1 is computed before it is first
    used). Each iteration updates modes 1..N in order from the Gram matrix of
    ``Z = [[x; A1ᵀ, ..., I, ..., ANᵀ]]``, then evaluates the fit; the loop
    stops once the fit improves by less than ``cfg.fit_threshold``.

    Args:
        x: Dense array or SparseTensor of order 2 to 4
        core_dims: Target core dims
        cfg: Stopping rules (defaults from settings)
        init: ``"hosvd"`` or ``"random"`` orthonormal starting factors
        seed: Seed of the random initialization
        square: Eigendecompose ``M Mᵀ`` (default ``settings.SQUARE_GRAM``)

    Returns:
        RunResult whose fit_history holds the fit after each iteration
    """
    cfg = cfg or ConvergenceConfig()
    square = settings.SQUARE_GRAM if square is None else square
    dims = tensor_dims(x)
    core_dims = check_core_dims(dims, core_dims)
    order = len(dims)
    norm_x = tensor_norm(x)
    if norm_x == 0.0:
        raise ZeroNormError("cannot decompose an all-zero tensor")

    if init == "hosvd":
        initial, deficient = leading_factors(x, core_dims, range(1, order), square)
    elif init == "random":
        rng = np.random.default_rng(seed)
        initial = {n: random_orthonormal(dims[n], core_dims[n], rng) for n in range(1, order)}
        deficient = []
    else:
        raise ValueError(f"unknown initialization {init!r}")
    factors = [initial.get(n) for n in range(order)]
    deficient = set(deficient)

    history = []
    terminated_by = "max_iterations"
    previous_fit = 0.0
    core = None
    for iteration in range(1, cfg.max_iterations + 1):
        for n in range(order):
            rest = other_modes(order, n)
            z = project(x, {m: factors[m].T for m in rest})
            gram = account(np.tensordot(z, z, axes=(rest, rest)))
            result = leading_eigenpairs(gram, core_dims[n], square)
            factors[n] = result.vectors
            if result.rank_deficient:
                deficient.add(n)
        core = n_mode_product(z, factors[order - 1].T, order - 1)
        fit = fit_from_core(norm_x, core)
        history.append(fit)
        logger.info(f"HOOI iteration {iteration}: fit {fit:.10f}")
        if delta_fit(previous_fit, fit) < cfg.fit_threshold:
            terminated_by = "threshold"
            break
        previous_fit = fit

    model = TuckerModel(core=np.ascontiguousarray(core), factors=factors)
    return RunResult(
        model=model,
        fit_history=history,
        iterations=len(history),
        terminated_by=terminated_by,
        final_fit=history[-1],
        flags={"rank_deficient_modes": sorted(deficient)},
    )
