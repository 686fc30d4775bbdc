"""Dense tensor container and the mode-level algebra everything else builds on.

Linearization convention
------------------------
A tensor of dimensions ``(d_1, ..., d_N)`` is stored logically with mode-1
varying fastest (the column-major generalization).  ``vectorize`` and the
``data`` property flatten in that order, and the mode-``n`` matricization
orders its columns by the remaining modes with lower modes fastest.  All
round-trip guarantees below refer to this single convention.

Mode indices are 1-based throughout (``n`` ranges over ``1..N``).

All operations are pure: inputs are never mutated (arrays are stored
read-only) and outputs are fresh tensors, so values are safe to share
across threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Raised when operands have inconsistent dimensions or modes."""


def _sanitize(values, dims=None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if dims is not None:
        arr = arr.reshape(dims, order="F")
    if arr.ndim < 1:
        raise ShapeError("tensor order must be at least 1")
    if any(d < 1 for d in arr.shape):
        raise ShapeError(f"all dimensions must be >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("tensor entries must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DenseTensor:
    """Immutable dense N-order tensor of 64-bit floats."""

    array: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "array", _sanitize(self.array))

    @classmethod
    def from_flat(cls, data, dims) -> "DenseTensor":
        """Build from a flat buffer in mode-1-fastest order."""
        data = np.asarray(data, dtype=np.float64)
        dims = tuple(int(d) for d in dims)
        if data.size != int(np.prod(dims)):
            raise ShapeError(f"flat length {data.size} does not match dims {dims}")
        return cls(_sanitize(data, dims))

    @classmethod
    def zeros(cls, dims) -> "DenseTensor":
        return cls(np.zeros(tuple(int(d) for d in dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def order(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Flat copy of the entries in mode-1-fastest order."""
        return self.array.ravel(order="F").copy()


def inner(a: DenseTensor, b: DenseTensor) -> float:
    """Sum of elementwise products; symmetric and bilinear."""
    if a.dims != b.dims:
        raise ShapeError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return float(a.array.reshape(-1) @ b.array.reshape(-1))


def frob_norm(a: DenseTensor) -> float:
    return float(np.linalg.norm(a.array.reshape(-1)))


def vectorize(a: DenseTensor) -> np.ndarray:
    """Flatten in mode-1-fastest order; ``inner(a, b) == vec(a) @ vec(b)``."""
    return a.array.ravel(order="F").copy()


def from_vector(vec, dims) -> DenseTensor:
    """Inverse of :func:`vectorize`."""
    return DenseTensor.from_flat(vec, dims)


@dataclass(frozen=True)
class Matricization:
    """Mode-``n`` unfolding: rows index mode ``n``, columns the rest."""

    mode: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2:
            raise ShapeError("matricization data must be 2-D")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


def _check_mode(mode: int, order: int) -> None:
    if not 1 <= mode <= order:
        raise ShapeError(f"mode {mode} out of range for order-{order} tensor")


def matricize(a: DenseTensor, mode: int) -> Matricization:
    """Unfold ``a`` along ``mode`` (columns ordered lower-modes-fastest)."""
    _check_mode(mode, a.order)
    moved = np.moveaxis(a.array, mode - 1, 0)
    return Matricization(mode, moved.reshape(moved.shape[0], -1, order="F"))


def tensorize(m: Matricization, dims) -> DenseTensor:
    """Fold a matricization back; exact inverse of :func:`matricize`."""
    dims = tuple(int(d) for d in dims)
    _check_mode(m.mode, len(dims))
    rest = dims[: m.mode - 1] + dims[m.mode :]
    expected = (dims[m.mode - 1], int(np.prod(rest)) if rest else 1)
    if (m.rows, m.cols) != expected:
        raise ShapeError(
            f"matricization shape {(m.rows, m.cols)} inconsistent with dims {dims} at mode {m.mode}"
        )
    folded = m.matrix.reshape((dims[m.mode - 1],) + rest, order="F")
    return DenseTensor(np.moveaxis(folded, 0, m.mode - 1))


def mode_product(a: DenseTensor, b, mode: int) -> DenseTensor:
    """Mode-``mode`` matrix product; satisfies ``M_n(a x_n B) == B @ M_n(a)``."""
    _check_mode(mode, a.order)
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise ShapeError("mode-product factor must be a matrix")
    if b.shape[1] != a.dims[mode - 1]:
        raise ShapeError(
            f"factor has {b.shape[1]} columns but mode {mode} has size {a.dims[mode - 1]}"
        )
    unfolded = matricize(a, mode)
    new_dims = a.dims[: mode - 1] + (b.shape[0],) + a.dims[mode:]
    return tensorize(Matricization(mode, b @ unfolded.matrix), new_dims)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive."""
    u = u.copy()
    idx = np.argmax(np.abs(u), axis=0)
    flip = u[idx, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    return u


def hosvd_truncate(a: DenseTensor, ranks) -> DenseTensor:
    """Project onto multi-linear rank ``ranks`` via truncated mode-wise SVD.

    Returns ``G x_1 U_1 ... x_N U_N`` where ``U_n`` holds the top left
    singular vectors of the mode-``n`` unfolding of ``a`` and
    ``G = a x_1 U_1' ... x_N U_N'``.  Idempotent and norm non-increasing.
    """
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != a.order:
        raise ShapeError(f"expected {a.order} ranks, got {len(ranks)}")
    for r, d in zip(ranks, a.dims):
        if not 1 <= r <= d:
            raise ShapeError(f"rank {r} invalid for dimension {d}")
    factors = []
    for n in range(1, a.order + 1):
        u, _, _ = np.linalg.svd(matricize(a, n).matrix, full_matrices=False)
        factors.append(_fix_signs(u[:, : ranks[n - 1]]))
    core = a
    for n, u in enumerate(factors, start=1):
        core = mode_product(core, u.T, n)
    out = core
    for n, u in enumerate(factors, start=1):
        out = mode_product(out, u, n)
    return out


def multilinear_ranks(a: DenseTensor, tol: float = 1e-8) -> tuple[int, ...]:
    """Numerical rank of each mode unfolding (singular values above ``tol``)."""
    out = []
    for n in range(1, a.order + 1):
        s = np.linalg.svd(matricize(a, n).matrix, compute_uv=False)
        out.append(int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0))))
    return tuple(out)
