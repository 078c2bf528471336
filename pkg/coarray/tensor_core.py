"""
Dense complex tensors and the multilinear operations the pipeline is built on.

Layout convention (used everywhere in the package): data are stored
row-major, and in any grouped Kronecker product the first listed factor
varies slowest. So grouping modes (i, j) of a rank-1 tensor a ∘ b produces
numpy.kron(a, b), and the mode-n unfolding of a CP tensor with factors
(A_0, ..., A_{N-1}) is A_n @ khatri_rao(A_0, ..., A_{n-1}, A_{n+1}, ...).T.

Modes are 0-based.
"""
import logging
from functools import reduce

import numpy as np

from .errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)


class DenseTensor:
    """An N-way complex array with a read-only row-major buffer."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.complex128)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        view = arr.view()
        view.flags.writeable = False
        self._data = view

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> tuple:
        return self._data.shape

    @property
    def order(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def norm(self) -> float:
        return float(np.linalg.norm(self._data.ravel()))

    def conj(self) -> "DenseTensor":
        return DenseTensor(self._data.conj())

    def reshape(self, shape) -> "DenseTensor":
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != self.size:
            raise ShapeError("cannot reshape {} into {}".format(self.shape, shape))
        return DenseTensor(self._data.reshape(shape))

    def __add__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeError("shape mismatch {} vs {}".format(self.shape, other.shape))
        return DenseTensor(self._data + other._data)

    def __sub__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        if other.shape != self.shape:
            raise ShapeError("shape mismatch {} vs {}".format(self.shape, other.shape))
        return DenseTensor(self._data - other._data)

    def __mul__(self, scalar):
        return DenseTensor(self._data * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return "DenseTensor(shape={})".format(self.shape)


def _check_mode(x: DenseTensor, n: int) -> int:
    if not isinstance(n, (int, np.integer)) or not 0 <= n < x.order:
        raise ParameterError("mode {} out of range for a {}-way tensor".format(n, x.order))
    return int(n)


def mode_n_product(x: DenseTensor, a, n: int) -> DenseTensor:
    """x ×_n a: contracts mode n of x with the columns of a (J_n × I_n)."""
    n = _check_mode(x, n)
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[1] != x.shape[n]:
        raise ShapeError(
            "mode-{} product needs a matrix with {} columns, got shape {}".format(n, x.shape[n], a.shape)
        )
    out = np.tensordot(a, x.data, axes=(1, n))
    return DenseTensor(np.moveaxis(out, 0, n))


def outer_product(a: DenseTensor, b: DenseTensor) -> DenseTensor:
    return DenseTensor(np.multiply.outer(a.data, b.data))


def outer_vectors(*vectors) -> DenseTensor:
    """a_0 ∘ a_1 ∘ ... for plain 1-D arrays."""
    return DenseTensor(reduce(np.multiply.outer, [np.asarray(v) for v in vectors]))


def permute_modes(x: DenseTensor, perm) -> DenseTensor:
    """Output mode i is input mode perm[i]."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(x.order)):
        raise ParameterError("{} is not a permutation of modes 0..{}".format(perm, x.order - 1))
    return DenseTensor(np.transpose(x.data, perm))


def inverse_permutation(perm) -> list:
    inv = [0] * len(perm)
    for i, p in enumerate(perm):
        inv[p] = i
    return inv


def group_modes(x: DenseTensor, groups) -> DenseTensor:
    """
    Generalized tensorization: merge each group of modes into one mode.

    `groups` is an ordered partition of the modes, e.g. [[0, 1], [2], [3, 4]].
    If the concatenated groups are not already 0..N-1 in order the tensor is
    permuted first. Within a group the first listed mode varies slowest.
    """
    groups = [[int(m) for m in g] for g in groups]
    flat = [m for g in groups for m in g]
    if any(len(g) == 0 for g in groups) or sorted(flat) != list(range(x.order)):
        raise ParameterError("{} is not a partition of modes 0..{}".format(groups, x.order - 1))
    data = x.data
    if flat != list(range(x.order)):
        data = np.transpose(data, flat)
    new_shape = [int(np.prod([x.shape[m] for m in g])) for g in groups]
    return DenseTensor(np.reshape(data, new_shape))


def unfold(x: DenseTensor, n: int) -> np.ndarray:
    """Mode-n unfolding, shape (I_n, prod of the other dimensions)."""
    n = _check_mode(x, n)
    return np.moveaxis(x.data, n, 0).reshape(x.shape[n], -1)


def fold(matrix, n: int, shape) -> DenseTensor:
    shape = tuple(shape)
    moved = [shape[n]] + [s for i, s in enumerate(shape) if i != n]
    return DenseTensor(np.moveaxis(np.reshape(matrix, moved), 0, n))


def khatri_rao(*matrices) -> np.ndarray:
    """Column-wise Kronecker product; the first matrix indexes the slowest rows."""
    mats = [np.asarray(m) for m in matrices]
    if not mats:
        raise ParameterError("khatri_rao needs at least one matrix")
    if any(m.ndim != 2 for m in mats):
        raise ShapeError("khatri_rao expects 2-D matrices")
    k = mats[0].shape[1]
    if any(m.shape[1] != k for m in mats):
        raise ShapeError(
            "khatri_rao column counts differ: {}".format([m.shape[1] for m in mats])
        )
    out = mats[0]
    for m in mats[1:]:
        out = (out[:, None, :] * m[None, :, :]).reshape(-1, k)
    return out


def kronecker(*matrices) -> np.ndarray:
    if not matrices:
        raise ParameterError("kronecker needs at least one matrix")
    return reduce(np.kron, [np.asarray(m) for m in matrices])


def cp_tensor(factors, weights=None) -> DenseTensor:
    """Sum over columns r of weights[r] · A_0[:, r] ∘ A_1[:, r] ∘ ..."""
    factors = [np.asarray(f) for f in factors]
    k = factors[0].shape[1]
    if any(f.ndim != 2 or f.shape[1] != k for f in factors):
        raise ShapeError("factor matrices must share their column count")
    first = factors[0] if weights is None else factors[0] * np.asarray(weights)[None, :]
    shape = [f.shape[0] for f in factors]
    flat = first @ khatri_rao(*factors[1:]).T if len(factors) > 1 else first.sum(axis=1)
    return DenseTensor(np.reshape(flat, shape))
