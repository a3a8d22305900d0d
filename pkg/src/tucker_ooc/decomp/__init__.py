"""Tucker decomposition drivers: HO-SVD, HOOI, Slice and Multislice Projection."""

from .convergence import check_core_dims, delta_core_growth, delta_fit
from .hooi import hooi
from .hosvd import ho_svd, run_ho_svd
from .projection import (
    StepEvent,
    multislice_projection,
    required_stores,
    slice_projection,
)
from .slicewise import core_from_slices, fit_from_slices, slice_gram

ALGORITHMS = ("hosvd", "hooi", "sp", "mp")

__all__ = [
    "ALGORITHMS",
    "StepEvent",
    "check_core_dims",
    "core_from_slices",
    "delta_core_growth",
    "delta_fit",
    "fit_from_slices",
    "ho_svd",
    "hooi",
    "multislice_projection",
    "required_stores",
    "run_ho_svd",
    "slice_gram",
    "slice_projection",
]
