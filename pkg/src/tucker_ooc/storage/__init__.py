"""Sparse tensor ingestion, external sorting and slice stores."""

from .container import load_model, save_model
from .coo import CooFile, CooRecord, load_coo, parse_coo, write_coo
from .extsort import SortResult, external_sort, external_sort_by_mode, system_sort_command
from .slices import (
    SliceMatrix,
    SliceStore,
    build_slice_store,
    open_slice_store,
    store_dirname,
)

__all__ = [
    "CooFile",
    "CooRecord",
    "SliceMatrix",
    "SliceStore",
    "SortResult",
    "build_slice_store",
    "external_sort",
    "external_sort_by_mode",
    "load_coo",
    "load_model",
    "open_slice_store",
    "parse_coo",
    "save_model",
    "store_dirname",
    "system_sort_command",
    "write_coo",
]
