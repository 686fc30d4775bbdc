"""Weakly decomposable norms: value, dual norm, proximal operator, constants.

Four structures are supported:

* ``OverlappedNuclear`` -- average of nuclear norms of all mode unfoldings;
* ``SliceNuclear``      -- sum of nuclear norms of the (1,2)-slices of a
  third-order tensor;
* ``EntryL1``           -- entrywise l1;
* ``FiberGroup``        -- sum of q-norms over mode-``m`` fibers (group norm).

Each structure knows its weak-decomposability constant ``c_R`` and its
compatibility constant ``phi`` (a function of the structural parameters).
The overlapped nuclear prox has no closed form and is solved by consensus
splitting (one auxiliary variable per mode, per-mode singular value
thresholding plus an averaging step).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tensor import DenseTensor, Matricization, ShapeError, matricize, tensorize


class ProxConvergenceError(RuntimeError):
    """Inner prox solver did not converge; carries the final residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class ProxOptions:
    """Options for iterative prox solvers (only the overlapped case needs them)."""

    max_iters: int = 500
    tol: float = 1e-8
    rho: float = 1.0
    strict: bool = True  # raise ProxConvergenceError on non-convergence


@dataclass(frozen=True)
class ProxInfo:
    iterations: int
    residual: float
    converged: bool


def eta(x: float, m: float) -> float:
    """``max(1, x**m)``, the dimension factor of the fiber-group constants."""
    return max(1.0, float(x) ** m)


def soft_threshold(values: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - tau, 0.0)


def _svt(mat: np.ndarray, tau: float) -> np.ndarray:
    """Singular value soft-thresholding of a matrix."""
    u, s, vt = np.linalg.svd(mat, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ vt


class Regularizer:
    """Base interface; concrete structures are frozen dataclasses below."""

    c_R: float = 1.0

    @property
    def alpha(self) -> float:
        """Penalty inflation factor ``(c_R + 3) / (2 c_R)``."""
        return (self.c_R + 3.0) / (2.0 * self.c_R)

    def check_dims(self, dims) -> None:
        if len(dims) < 1:
            raise ShapeError("tensor order must be at least 1")

    def value(self, a: DenseTensor) -> float:
        raise NotImplementedError

    def dual(self, a: DenseTensor) -> float:
        raise NotImplementedError

    def prox(self, a: DenseTensor, tau: float, opts: ProxOptions | None = None) -> DenseTensor:
        raise NotImplementedError

    def prox_with_info(
        self, a: DenseTensor, tau: float, opts: ProxOptions | None = None, state=None
    ) -> tuple[DenseTensor, ProxInfo, object]:
        """Like :meth:`prox` but returns solver info and reusable warm-start state."""
        out = self.prox(a, tau, opts)
        return out, ProxInfo(iterations=0, residual=0.0, converged=True), None

    def phi(self, dims) -> float:
        """Compatibility constant for the declared structural parameters."""
        raise NotImplementedError


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ValueError(f"prox step tau must be positive, got {tau}")


@dataclass(frozen=True)
class OverlappedNuclear(Regularizer):
    """Average of nuclear norms of every mode unfolding."""

    rank: int | None = None
    c_R = 0.5

    def value(self, a: DenseTensor) -> float:
        total = 0.0
        for n in range(1, a.order + 1):
            total += float(np.linalg.svd(matricize(a, n).matrix, compute_uv=False).sum())
        return total / a.order

    def dual(self, a: DenseTensor) -> float:
        spec = 0.0
        for n in range(1, a.order + 1):
            s = np.linalg.svd(matricize(a, n).matrix, compute_uv=False)
            spec = max(spec, float(s[0]) if s.size else 0.0)
        return a.order * spec

    def prox(self, a: DenseTensor, tau: float, opts: ProxOptions | None = None) -> DenseTensor:
        out, info, _ = self.prox_with_info(a, tau, opts)
        if not info.converged and (opts or ProxOptions()).strict:
            raise ProxConvergenceError(
                f"consensus prox stalled at residual {info.residual:.3e} "
                f"after {info.iterations} iterations",
                residual=info.residual,
                iterations=info.iterations,
            )
        return out

    def prox_with_info(self, a, tau, opts=None, state=None):
        _check_tau(tau)
        opts = opts or ProxOptions()
        arr = a.array
        n_modes = arr.ndim
        thresh = tau / (n_modes * opts.rho)
        # precomputed unfold/fold index gymnastics; the loop below stays on raw
        # arrays because it runs inside every solver step
        perms = []
        for j in range(n_modes):
            perm = (j,) + tuple(i for i in range(n_modes) if i != j)
            inv = tuple(int(p) for p in np.argsort(perm))
            moved_shape = tuple(arr.shape[p] for p in perm)
            perms.append((perm, inv, moved_shape))
        if state is None:
            z = arr.copy()
            dual_vars = [np.zeros_like(arr) for _ in range(n_modes)]
        else:
            z, dual_vars = state
            z = z.copy()
            dual_vars = [u.copy() for u in dual_vars]
        aux = [None] * n_modes
        change = np.inf
        it = 0
        for it in range(1, opts.max_iters + 1):
            acc = arr.copy()
            for j, (perm, inv, moved_shape) in enumerate(perms):
                v = z - dual_vars[j]
                mat = v.transpose(perm).reshape(moved_shape[0], -1)
                aux[j] = _svt(mat, thresh).reshape(moved_shape).transpose(inv)
                acc += opts.rho * (aux[j] + dual_vars[j])
            z_new = acc / (1.0 + n_modes * opts.rho)
            for j in range(n_modes):
                dual_vars[j] = dual_vars[j] + aux[j] - z_new
            change = float(np.linalg.norm(z_new - z))
            z = z_new
            if change < opts.tol:
                break
        primal = max(float(np.linalg.norm(aux[j] - z)) for j in range(n_modes))
        info = ProxInfo(iterations=it, residual=max(change, primal), converged=change < opts.tol)
        return DenseTensor(z), info, (z, dual_vars)

    def phi(self, dims) -> float:
        if self.rank is None:
            raise ValueError("rank parameter required for the compatibility constant")
        return 2.0 * self.rank


@dataclass(frozen=True)
class SliceNuclear(Regularizer):
    """Sum of nuclear norms over the (1,2)-slices of a third-order tensor."""

    rank: int | None = None
    n_slices: int | None = None
    slice_modes: tuple[int, int] = (1, 2)
    c_R = 1.0

    def check_dims(self, dims) -> None:
        if len(dims) != 3:
            raise ShapeError("slice nuclear norm requires a third-order tensor")
        if self.slice_modes != (1, 2):
            raise ShapeError("only (1,2)-slices are supported")

    def _slices(self, a: DenseTensor) -> np.ndarray:
        self.check_dims(a.dims)
        # stack of d3 matrices of shape d1 x d2
        return np.moveaxis(a.array, 2, 0)

    def value(self, a: DenseTensor) -> float:
        s = np.linalg.svd(self._slices(a), compute_uv=False)
        return float(s.sum())

    def dual(self, a: DenseTensor) -> float:
        s = np.linalg.svd(self._slices(a), compute_uv=False)
        return float(s[:, 0].max()) if s.size else 0.0

    def prox(self, a: DenseTensor, tau: float, opts: ProxOptions | None = None) -> DenseTensor:
        _check_tau(tau)
        stack = self._slices(a)
        u, s, vt = np.linalg.svd(stack, full_matrices=False)
        s = np.maximum(s - tau, 0.0)
        out = np.einsum("kij,kj,kjl->kil", u, s, vt)
        return DenseTensor(np.moveaxis(out, 0, 2))

    def phi(self, dims) -> float:
        if self.rank is None:
            raise ValueError("rank parameter required for the compatibility constant")
        return 2.0 * self.rank


@dataclass(frozen=True)
class EntryL1(Regularizer):
    """Entrywise l1 norm."""

    sparsity: int | None = None
    c_R = 1.0

    def value(self, a: DenseTensor) -> float:
        return float(np.abs(a.array).sum())

    def dual(self, a: DenseTensor) -> float:
        return float(np.abs(a.array).max())

    def prox(self, a: DenseTensor, tau: float, opts: ProxOptions | None = None) -> DenseTensor:
        _check_tau(tau)
        return DenseTensor(soft_threshold(a.array, tau))

    def phi(self, dims) -> float:
        if self.sparsity is None:
            raise ValueError("sparsity parameter required for the compatibility constant")
        return float(self.sparsity)


@dataclass(frozen=True)
class FiberGroup(Regularizer):
    """Sum over mode-``mode`` fibers of their q-norms (group norm, q > 1)."""

    sparsity: int | None = None
    mode: int = 1
    q: float = 2.0
    c_R = 1.0

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError(f"fiber norm requires q > 1, got {self.q}")

    def check_dims(self, dims) -> None:
        if len(dims) != 3:
            raise ShapeError("fiber group norm requires a third-order tensor")
        if not 1 <= self.mode <= len(dims):
            raise ShapeError(f"fiber mode {self.mode} out of range")

    @property
    def p(self) -> float:
        """Holder conjugate of q."""
        return self.q / (self.q - 1.0)

    def _fibers(self, a: DenseTensor) -> np.ndarray:
        self.check_dims(a.dims)
        # columns of the mode unfolding are exactly the mode fibers
        return matricize(a, self.mode).matrix

    def value(self, a: DenseTensor) -> float:
        fib = self._fibers(a)
        return float(np.sum(np.linalg.norm(fib, ord=self.q, axis=0)))

    def dual(self, a: DenseTensor) -> float:
        fib = self._fibers(a)
        return float(np.max(np.linalg.norm(fib, ord=self.p, axis=0)))

    def prox(self, a: DenseTensor, tau: float, opts: ProxOptions | None = None) -> DenseTensor:
        _check_tau(tau)
        if self.q != 2.0:
            raise NotImplementedError("fiber prox has a closed form only for q = 2")
        fib = self._fibers(a).copy()
        norms = np.linalg.norm(fib, axis=0)
        scale = np.where(norms > tau, 1.0 - tau / np.where(norms > 0, norms, 1.0), 0.0)
        fib *= scale
        return tensorize(Matricization(self.mode, fib), a.dims)

    def phi(self, dims) -> float:
        if self.sparsity is None:
            raise ValueError("sparsity parameter required for the compatibility constant")
        self.check_dims(dims)
        d_fiber = dims[self.mode - 1]
        return eta(d_fiber, 1.0 / self.q - 0.5) ** 2 * float(self.sparsity)


RegularizerSpec = Regularizer  # alias: a spec is a structure tag plus parameters


def reg_value(spec: Regularizer, a: DenseTensor) -> float:
    spec.check_dims(a.dims)
    return spec.value(a)


def reg_dual(spec: Regularizer, a: DenseTensor) -> float:
    spec.check_dims(a.dims)
    return spec.dual(a)


def reg_prox(
    spec: Regularizer, a: DenseTensor, tau: float, opts: ProxOptions | None = None
) -> DenseTensor:
    spec.check_dims(a.dims)
    return spec.prox(a, tau, opts)


def compatibility_phi(spec: Regularizer, dims) -> float:
    return spec.phi(tuple(int(d) for d in dims))


def with_params(spec: Regularizer, **kwargs) -> Regularizer:
    """Return a copy of ``spec`` with updated structural parameters."""
    return replace(spec, **kwargs)
