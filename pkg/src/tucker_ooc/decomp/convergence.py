"""Stopping rules and shared argument checks for the decomposition drivers."""

from typing import Sequence, Tuple

from ..models import DimensionError, ZeroNormError
from ..tensor import check_order


def delta_fit(previous: float, current: float) -> float:
    """Change in fit between two consecutive iterations."""
    return current - previous


def delta_core_growth(previous_norm: float, current_norm: float) -> float:
    """Relative growth of the core: ``1 - ||G(t-1)|| / ||G(t)||``.

    Raises:
        ZeroNormError: If the current core is all zero
    """
    if current_norm <= 0.0:
        raise ZeroNormError("core growth is undefined for an all-zero core")
    return 1.0 - previous_norm / current_norm


def check_core_dims(dims: Sequence[int], core_dims: Sequence[int]) -> Tuple[int, ...]:
    """Validate ``core_dims`` against the tensor dims and return it as a tuple."""
    core_dims = tuple(int(j) for j in core_dims)
    check_order(len(dims))
    if len(core_dims) != len(dims):
        raise DimensionError(
            f"core has {len(core_dims)} modes, tensor has {len(dims)}"
        )
    for n, (i, j) in enumerate(zip(dims, core_dims)):
        if not 1 <= j <= i:
            raise DimensionError(
                f"core dim {j} is invalid for mode {n} of size {i}",
                "core dims must satisfy 1 <= J_n <= I_n",
            )
    return core_dims
