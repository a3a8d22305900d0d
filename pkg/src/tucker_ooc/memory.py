"""Instrumented byte accounting for tensor, slice and sort buffers.

Only buffers handed to :func:`account` or :func:`charge` are counted. Arrays are
released through ``weakref.finalize`` when numpy frees them, so the running
total follows the real lifetime of each buffer. A portable stand-in for OS
resident-set measurements.
"""

import logging
import threading
import weakref
from contextlib import contextmanager
from typing import Dict, Iterator, List

import numpy as np

from .config import settings
from .models import MemoryBudgetError

logger = logging.getLogger("tucker_ooc.memory")

_lock = threading.RLock()
_trackers: List["PeakTracker"] = []
_owned: Dict[int, List["PeakTracker"]] = {}


class PeakTracker:
    """High-water mark of accounted bytes inside one scope."""

    def __init__(self, cap_bytes: int = 0):
        self.current = 0
        self.peak = 0
        self.cap_bytes = cap_bytes

    def _add(self, nbytes: int) -> None:
        self.current += nbytes
        if self.current > self.peak:
            self.peak = self.current

    def _release(self, nbytes: int) -> None:
        self.current -= nbytes

    def over_cap(self) -> bool:
        return bool(self.cap_bytes) and self.current > self.cap_bytes


def _add_all(trackers: List[PeakTracker], nbytes: int) -> None:
    with _lock:
        for tracker in trackers:
            tracker._add(nbytes)
        exceeded = [t for t in trackers if t.over_cap()]
    if exceeded:
        raise MemoryBudgetError(
            f"tracked memory {exceeded[0].current} bytes exceeds cap of "
            f"{exceeded[0].cap_bytes} bytes"
        )


def _release_all(trackers: List[PeakTracker], nbytes: int) -> None:
    with _lock:
        for tracker in trackers:
            tracker._release(nbytes)


def _owner(array: np.ndarray) -> np.ndarray:
    while isinstance(array.base, np.ndarray):
        array = array.base
    return array


def _forget(key: int, targets: List[PeakTracker], nbytes: int) -> None:
    with _lock:
        _owned.pop(key, None)
        targets = list(targets)
    _release_all(targets, nbytes)


def account(array: np.ndarray) -> np.ndarray:
    """Count the buffer behind ``array`` against every open scope until it is freed.

    Views are charged to the array that owns their data, once per scope. An array
    that outlives its scope is charged again by the next scope that accounts it.
    """
    if not _trackers:
        return array
    owner = _owner(array)
    if owner.nbytes == 0:
        return array
    key = id(owner)
    with _lock:
        targets = _owned.get(key)
        if targets is None:
            targets = _owned[key] = []
            weakref.finalize(owner, _forget, key, targets, owner.nbytes)
        fresh = [t for t in _trackers if t not in targets]
        targets.extend(fresh)
    _add_all(fresh, owner.nbytes)
    return array


@contextmanager
def charge(nbytes: int) -> Iterator[None]:
    """Count a non-array buffer (e.g. a sort run) for the duration of the block."""
    with _lock:
        targets = list(_trackers)
    try:
        _add_all(targets, nbytes)
        yield
    finally:
        _release_all(targets, nbytes)


@contextmanager
def track_peak_bytes(cap_bytes: int = None) -> Iterator[PeakTracker]:
    """Open a tracking scope; ``tracker.peak`` holds the high-water mark.

    Args:
        cap_bytes: Raise MemoryBudgetError once tracked bytes exceed this
            (defaults to ``settings.MEMORY_CAP_BYTES``; 0 disables the cap)
    """
    tracker = PeakTracker(settings.MEMORY_CAP_BYTES if cap_bytes is None else cap_bytes)
    with _lock:
        _trackers.append(tracker)
    try:
        yield tracker
    finally:
        with _lock:
            _trackers.remove(tracker)
        logger.debug(f"Tracked peak: {tracker.peak} bytes")
