"""Deterministic leading eigenvectors of symmetric matrices."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .models import DimensionError

logger = logging.getLogger("tucker_ooc.linalg")

SYMMETRY_TOLERANCE = 1e-10


@dataclass
class EigenResult:
    """Leading eigenpairs; ``rank_deficient`` marks a completed basis."""

    vectors: np.ndarray
    values: np.ndarray
    rank_deficient: bool = False


def canonicalize_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude is positive (lowest index wins ties)."""
    mags = np.abs(u)
    # entries within rounding of the column maximum count as ties
    pivots = np.argmax(mags >= mags.max(axis=0, initial=0.0) - 1e-12, axis=0)
    signs = np.sign(u[pivots, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def orthonormal_completion(u: np.ndarray, k: int) -> np.ndarray:
    """Extend the orthonormal columns of ``u`` to ``k`` columns.

    Standard basis vectors are orthogonalized against the current columns in
    ascending index order (two Gram-Schmidt passes); near-dependent candidates
    are skipped.
    """
    n = u.shape[0]
    columns = [u[:, j] for j in range(u.shape[1])]
    for i in range(n):
        if len(columns) == k:
            break
        v = np.zeros(n)
        v[i] = 1.0
        for _ in range(2):
            for q in columns:
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            columns.append(v / norm)
    return np.column_stack(columns) if columns else np.zeros((n, 0))


def leading_eigenpairs(s: np.ndarray, k: int, square: bool = False) -> EigenResult:
    """Eigenpairs of ``s`` for the ``k`` algebraically largest eigenvalues.

    Args:
        s: Symmetric matrix
        k: Number of eigenvectors, ``1 <= k <= n``
        square: Decompose ``s sᵀ`` instead, as the published MATLAB code does

    Returns:
        EigenResult with columns ordered by eigenvalue, descending
    """
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {s.shape}")
    n = s.shape[0]
    if not 1 <= k <= n:
        raise DimensionError(f"cannot take {k} eigenvectors of a {n}x{n} matrix")
    if not np.all(np.isfinite(s)):
        raise DimensionError("matrix has non-finite entries")
    scale = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > SYMMETRY_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise DimensionError("matrix is not symmetric within tolerance")

    s = 0.5 * (s + s.T)
    if square:
        s = s @ s.T
        s = 0.5 * (s + s.T)

    values, vectors = sla.eigh(s, check_finite=False, subset_by_index=[n - k, n - 1])
    values = values[::-1].copy()
    vectors = vectors[:, ::-1]

    # Eigenvalues this small belong to the numerical null space.
    tol = n * np.finfo(float).eps * np.linalg.norm(s)
    keep = np.abs(values) > tol
    rank_deficient = not bool(np.all(keep))
    if rank_deficient:
        logger.debug(f"Rank {int(keep.sum())} < {k}; completing the basis")
        kept = canonicalize_signs(vectors[:, keep])
        completed = orthonormal_completion(kept, k)
        extra = completed[:, kept.shape[1]:]
        out = np.empty((n, k))
        out[:, keep] = kept
        out[:, ~keep] = extra
        values = np.where(keep, values, 0.0)
        return EigenResult(out, values, True)
    return EigenResult(canonicalize_signs(vectors), values, False)


def leading_eigenvectors(s: np.ndarray, k: int, square: bool = False) -> np.ndarray:
    """Orthonormal ``n x k`` matrix of leading eigenvectors (see :func:`leading_eigenpairs`)."""
    return leading_eigenpairs(s, k, square).vectors
