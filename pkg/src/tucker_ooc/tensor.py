"""Dense multilinear algebra: matricization, n-mode products, Tucker operator, fit.

Tensors are ``numpy.ndarray`` objects of shape ``dims``. The documented flat
linearization is ``x.ravel(order="F")``: the index of the first mode varies
fastest. Matricizing on mode ``n`` lays out mode-``n`` fibers as columns with
the remaining modes ordered lower-numbered fastest, so for a third-order
tensor ``X_(0) = [x[:,0,0], x[:,1,0], ..., x[:,I2-1,I3-1]]``.

Modes are 0-based.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .memory import account
from .models import DimensionError, ZeroNormError

MIN_ORDER = 2
MAX_ORDER = 4


def check_order(order: int) -> None:
    """Reject tensor orders outside the supported range."""
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise DimensionError(
            f"tensor order {order} is not supported",
            f"supported orders are {MIN_ORDER}..{MAX_ORDER}",
        )


def check_mode(order: int, n: int) -> None:
    if not 0 <= n < order:
        raise DimensionError(f"mode {n} is out of range for an order-{order} tensor")


def other_modes(order: int, n: int) -> Tuple[int, ...]:
    return tuple(m for m in range(order) if m != n)


def matricize(x: np.ndarray, n: int) -> np.ndarray:
    """Return the mode-``n`` matricization ``X_(n)`` of shape ``I_n x prod(I_m, m != n)``."""
    check_order(x.ndim)
    check_mode(x.ndim, n)
    return np.reshape(np.moveaxis(x, n, 0), (x.shape[n], -1), order="F")


def fold(m: np.ndarray, n: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize`."""
    dims = tuple(int(d) for d in dims)
    check_order(len(dims))
    check_mode(len(dims), n)
    rest = tuple(dims[k] for k in other_modes(len(dims), n))
    if m.ndim != 2 or m.shape != (dims[n], int(np.prod(rest, dtype=np.int64))):
        raise DimensionError(
            f"matrix of shape {m.shape} cannot be folded on mode {n} into {dims}"
        )
    return np.moveaxis(np.reshape(m, (dims[n],) + rest, order="F"), 0, n)


def n_mode_product(x: np.ndarray, a: np.ndarray, n: int) -> np.ndarray:
    """Multiply every mode-``n`` fiber of ``x`` by ``a`` (``Y_(n) = A X_(n)``)."""
    check_order(x.ndim)
    check_mode(x.ndim, n)
    if a.ndim != 2 or a.shape[1] != x.shape[n]:
        raise DimensionError(
            f"matrix of shape {a.shape} does not match mode {n} of size {x.shape[n]}"
        )
    return np.moveaxis(account(np.tensordot(a, x, axes=(1, n))), 0, n)


def tucker_apply(
    g: np.ndarray, factors: Sequence[np.ndarray], modes: Optional[Sequence[int]] = None
) -> np.ndarray:
    """Tucker operator ``[[g; A1, ..., AN]]``.

    Args:
        g: Core tensor
        factors: One matrix per mode; ``factors[n].shape[1] == g.shape[n]``
        modes: Order in which the n-mode products are applied (default 0..N-1)

    Returns:
        Tensor of shape ``(factors[0].shape[0], ..., factors[N-1].shape[0])``
    """
    check_order(g.ndim)
    if len(factors) != g.ndim:
        raise DimensionError(f"expected {g.ndim} factors, got {len(factors)}")
    for n, factor in enumerate(factors):
        if factor.ndim != 2 or factor.shape[1] != g.shape[n]:
            raise DimensionError(
                f"factor {n} has shape {factor.shape}, core mode size is {g.shape[n]}"
            )
    order = range(g.ndim) if modes is None else modes
    if sorted(order) != list(range(g.ndim)):
        raise DimensionError(f"mode order {tuple(order)} is not a permutation")
    y = g
    for n in order:
        y = n_mode_product(y, factors[n], n)
    return y


def frobenius_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(x, dtype=np.float64))))


def fit(x: np.ndarray, xhat: np.ndarray) -> float:
    """``1 - ||x - xhat||_F / ||x||_F``; may be negative."""
    if x.shape != xhat.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {xhat.shape}")
    norm_x = frobenius_norm(x)
    if norm_x == 0.0:
        raise ZeroNormError("fit is undefined for an all-zero tensor")
    return 1.0 - frobenius_norm(x - xhat) / norm_x


def relative_fit(value: float, baseline: float) -> float:
    """Percentage improvement of ``value`` over ``baseline`` (HO-SVD in the reports)."""
    if baseline == 0.0:
        raise ZeroNormError("relative fit needs a non-zero baseline")
    return 100.0 * (value / baseline - 1.0)


def random_orthonormal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random ``rows x cols`` matrix with orthonormal columns."""
    if cols > rows:
        raise DimensionError(f"cannot build {cols} orthonormal columns of length {rows}")
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))


def synthesize(core: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor with multilinear rank at most ``core.shape``."""
    return tucker_apply(core, factors)


@dataclass
class SparseTensor:
    """In-RAM coordinate-format tensor with 0-based indices."""

    dims: Tuple[int, ...]
    indices: np.ndarray
    values: np.ndarray
    _unfoldings: Dict[int, sp.csr_matrix] = field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        check_order(len(self.dims))
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, len(self.dims))
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.indices.shape[0] != self.values.shape[0]:
            raise DimensionError("indices and values disagree on the number of nonzeros")
        account(self.indices)
        account(self.values)

    @classmethod
    def from_dense(cls, x: np.ndarray) -> "SparseTensor":
        idx = np.argwhere(x != 0)
        return cls(x.shape, idx, x[tuple(idx.T)])

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def norm(self) -> float:
        return frobenius_norm(self.values)

    def to_dense(self) -> np.ndarray:
        x = account(np.zeros(self.dims))
        x[tuple(self.indices.T)] = self.values
        return x

    def column_index(self, n: int) -> np.ndarray:
        """Column of each nonzero in ``X_(n)`` (lower-numbered modes fastest)."""
        check_mode(self.order, n)
        cols = np.zeros(self.nnz, dtype=np.int64)
        stride = 1
        for m in other_modes(self.order, n):
            cols += self.indices[:, m] * stride
            stride *= self.dims[m]
        return cols

    def matricize(self, n: int) -> sp.csr_matrix:
        """Sparse ``X_(n)`` with the same layout as dense :func:`matricize`.

        Unfoldings are cached on the tensor; iterative drivers reuse them.
        """
        if n in self._unfoldings:
            return self._unfoldings[n]
        ncols = int(np.prod([self.dims[m] for m in other_modes(self.order, n)], dtype=np.int64))
        mat = sp.csr_matrix(
            (self.values, (self.indices[:, n], self.column_index(n))),
            shape=(self.dims[n], ncols),
        )
        account(mat.data)
        account(mat.indices)
        account(mat.indptr)
        self._unfoldings[n] = mat
        return mat

    def mode_product(self, a: np.ndarray, n: int) -> np.ndarray:
        """Dense ``x ×_n a`` computed from the sparse unfolding."""
        check_mode(self.order, n)
        if a.ndim != 2 or a.shape[1] != self.dims[n]:
            raise DimensionError(
                f"matrix of shape {a.shape} does not match mode {n} of size {self.dims[n]}"
            )
        # (X_(n)ᵀ aᵀ)ᵀ = a X_(n); the transpose is Fortran-ordered so folding is a view
        y = account(np.asarray(self.matricize(n).T @ a.T)).T
        dims = list(self.dims)
        dims[n] = a.shape[0]
        return fold(y, n, dims)
