"""Penalized GLM estimation plus the quantities that size the exploration phase.

``fit`` minimizes ``glm_loss + lambda * R`` by accelerated proximal gradient
descent (backtracking line search with step expansion, momentum restart on
objective increase, best-iterate tracking).  ``gaussian_width_estimate``
evaluates the width of the unit ball ``{R <= 1}`` as the Monte-Carlo mean of
the dual norm of a standard Gaussian tensor, ``exploration_length`` turns it
into a round budget, and ``lambda_for`` evaluates the structure-specific
penalty schedules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .glm import GlmFamily, _stack_contexts, gradient_from_matrix, loss_from_matrix
from .regularizers import (
    EntryL1,
    FiberGroup,
    OverlappedNuclear,
    ProxInfo,
    ProxOptions,
    Regularizer,
    SliceNuclear,
    eta,
)
from .tensor import DenseTensor


@dataclass(frozen=True)
class FitOptions:
    """Solver options for :func:`fit`."""

    max_iters: int = 2000
    tol: float = 1e-8           # relative objective-change stopping threshold
    step_init: float = 1.0
    step_shrink: float = 0.5
    step_expand: float = 2.0
    suff_decrease: float = 1e-4  # slack factor on the backtracking majorization
    restart: bool = True
    stationarity_tol: float = 1e-6  # fixed-point residual required on top of tol
    prox: ProxOptions = ProxOptions(strict=False)


@dataclass
class FitDiagnostics:
    iterations: int
    objective: float
    rel_change: float
    converged: bool
    step: float
    prox_residual: float = 0.0
    prox_iterations: int = 0


@dataclass(frozen=True)
class WidthEstimate:
    mean: float
    stderr: float
    n_samples: int


@dataclass(frozen=True)
class LambdaSchedule:
    """Penalty schedule inputs: failure probability, noise scale, global multiplier.

    The sub-Gaussian context scale ``k = 1 / sqrt(prod(dims))`` and the
    inflation factor ``alpha = (c_R + 3) / (2 c_R)`` are derived at call time
    from the dimensions and the regularizer.
    """

    delta: float = 0.01
    noise_scale: float = 0.5
    c_lambda: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.c_lambda > 0:
            raise ValueError("c_lambda must be positive")


def gaussian_width_estimate(
    spec: Regularizer,
    dims,
    n_samples: int = 200,
    rng: np.random.Generator | None = None,
    rel_se_target: float = 0.05,
    max_samples: int = 20_000,
) -> WidthEstimate:
    """Monte-Carlo width of the unit ball ``{R <= 1}``: the mean dual norm of
    a standard Gaussian tensor.

    Draws ``n_samples`` first and keeps doubling while the standard error
    exceeds ``rel_se_target`` times the mean (capped at ``max_samples``).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    dims = tuple(int(d) for d in dims)
    spec.check_dims(dims)
    rng = rng or np.random.default_rng()
    values: list[float] = []

    def draw(count: int) -> None:
        for _ in range(count):
            g = DenseTensor(rng.standard_normal(dims))
            values.append(spec.dual(g))

    draw(n_samples)
    while True:
        arr = np.asarray(values)
        mean = float(arr.mean())
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else float("inf")
        if stderr <= rel_se_target * mean or len(arr) >= max_samples:
            return WidthEstimate(mean=mean, stderr=stderr, n_samples=len(arr))
        draw(min(len(arr), max_samples - len(arr)))


def exploration_length(c_explore: float, phi: float, width: float, horizon: int) -> int:
    """Exploration budget ``T1 = clamp(ceil(c * phi * width^2), 1, 0.9 T)``."""
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    raw = math.ceil(c_explore * phi * width * width)
    return int(min(max(raw, 1), math.floor(0.9 * horizon)))


def lambda_for(schedule: LambdaSchedule, spec: Regularizer, dims, t1: int) -> float:
    """Structure-specific penalty level at exploration length ``t1``.

    Strictly decreasing in ``t1`` and increasing as ``delta`` shrinks; the
    ``c_lambda`` multiplier absorbs the universal constants the bounds leave
    unspecified.
    """
    if t1 < 1:
        raise ValueError("t1 must be >= 1")
    dims = tuple(int(d) for d in dims)
    spec.check_dims(dims)
    delta = schedule.delta
    r_noise = schedule.noise_scale
    alpha = spec.alpha
    if isinstance(spec, OverlappedNuclear):
        n = len(dims)
        d = max(dims)
        lam = (alpha * r_noise * n / math.sqrt(t1)) * math.sqrt(
            2.0 * math.log(4.0 * t1 * n / delta) * math.log(2.0 * n * (d + d ** (n - 1)) / delta)
        )
    elif isinstance(spec, SliceNuclear):
        d1, d2, d3 = dims
        lam = (r_noise * (spec.c_R + 3.0) / (spec.c_R * math.sqrt(t1))) * math.sqrt(
            math.log(4.0 * t1 * d3 / delta) * math.log(2.0 * d3 * (d1 + d2) / delta)
        )
    elif isinstance(spec, EntryL1):
        size = int(np.prod(dims))
        k = 1.0 / math.sqrt(size)
        lam = ((spec.c_R + 3.0) * r_noise * k / (2.0 * spec.c_R * math.sqrt(t1))) * math.sqrt(
            math.log(2.0 * size / delta)
        )
    elif isinstance(spec, FiberGroup):
        size = int(np.prod(dims))
        k = 1.0 / math.sqrt(size)
        d_fiber = dims[spec.mode - 1]
        rest = size // d_fiber
        lam = (
            alpha
            * r_noise
            * k
            * (math.sqrt(d_fiber) + math.sqrt(math.log(4.0 * rest / delta)))
            / math.sqrt(t1)
            * math.sqrt(2.0 * math.log(4.0 * t1 * rest / delta))
            * eta(d_fiber, 0.5 - 1.0 / spec.q)
        )
    else:
        raise TypeError(f"unsupported structure kind {type(spec).__name__}")
    return schedule.c_lambda * lam


def _prox_step(spec, y_vec, scaled_tau, dims, prox_opts, state):
    """Prox of ``scaled_tau * R`` at ``y_vec``; identity when the step is zero."""
    if scaled_tau <= 0.0:
        return y_vec, ProxInfo(0, 0.0, True), state
    tens = DenseTensor.from_flat(y_vec, dims)
    if isinstance(spec, OverlappedNuclear):
        out, info, state = spec.prox_with_info(tens, scaled_tau, prox_opts, state)
        return out.data, info, state
    out = spec.prox(tens, scaled_tau, prox_opts)
    return out.data, ProxInfo(0, 0.0, True), state


def fit(
    contexts: Sequence[DenseTensor] | np.ndarray,
    rewards,
    spec: Regularizer,
    lam: float,
    family: GlmFamily,
    opts: FitOptions | None = None,
    dims=None,
    theta0: np.ndarray | None = None,
) -> tuple[DenseTensor, FitDiagnostics]:
    """Minimize ``glm_loss + lam * R`` by accelerated proximal gradient descent.

    Parameters
    ----------
    contexts
        Either a list of tensors or a pre-stacked ``(n, prod(dims))`` matrix
        of vectorized contexts (``dims`` required in that case).
    lam
        Penalty level, ``lam >= 0``.  At ``lam == 0`` the prox is the identity.
    theta0
        Optional warm start (flat vector); defaults to the zero tensor.

    Returns the iterate with the best composite objective seen, plus solver
    diagnostics.  Non-convergence is reported in the diagnostics rather than
    raised, so a caller in a bandit loop can proceed with the best iterate.
    """
    opts = opts or FitOptions()
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if isinstance(contexts, np.ndarray):
        if dims is None:
            raise ValueError("dims is required when contexts are pre-stacked")
        x = contexts
        dims = tuple(int(d) for d in dims)
    else:
        if len(contexts) == 0:
            raise ValueError("empty data")
        dims = contexts[0].dims
        x = _stack_contexts(contexts, dims)
    y = np.asarray(rewards, dtype=np.float64)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{x.shape[0]} contexts but {y.shape[0]} rewards")
    if y.shape[0] == 0:
        raise ValueError("empty data")
    spec.check_dims(dims)

    def reg_of(vec: np.ndarray) -> float:
        return spec.value(DenseTensor.from_flat(vec, dims)) if lam > 0 else 0.0

    theta = np.zeros(x.shape[1]) if theta0 is None else np.asarray(theta0, dtype=np.float64).copy()
    momentum = theta.copy()
    t_momentum = 1.0
    step = opts.step_init
    obj = loss_from_matrix(theta, x, y, family) + lam * reg_of(theta)
    best_theta, best_obj = theta.copy(), obj
    prox_state = None
    prox_info = ProxInfo(0, 0.0, True)
    total_prox_iters = 0
    rel_change = float("inf")
    converged = False
    iterations = 0
    shrank_last = False

    for iterations in range(1, opts.max_iters + 1):
        # grow the step only while the majorization keeps accepting it; a
        # failed expansion costs a full prox evaluation
        if not shrank_last:
            step = min(step * opts.step_expand, 1e12)
        shrank_last = False
        grad = gradient_from_matrix(momentum, x, y, family)
        loss_m = loss_from_matrix(momentum, x, y, family)
        while True:
            cand, prox_info, prox_state = _prox_step(
                spec, momentum - step * grad, step * lam, dims, opts.prox, prox_state
            )
            diff = cand - momentum
            quad = loss_m + grad @ diff + (1.0 + opts.suff_decrease) * (diff @ diff) / (2.0 * step)
            loss_c = loss_from_matrix(cand, x, y, family)
            if loss_c <= quad + 1e-12 * max(1.0, abs(loss_c)) or step < 1e-14:
                break
            step *= opts.step_shrink
            shrank_last = True
        total_prox_iters += prox_info.iterations
        obj_cand = loss_c + lam * reg_of(cand)

        if opts.restart and obj_cand > obj:
            # momentum overshoot: restart from the current iterate
            t_momentum = 1.0
            momentum = theta.copy()
            grad = gradient_from_matrix(momentum, x, y, family)
            loss_m = loss_from_matrix(momentum, x, y, family)
            while True:
                cand, prox_info, prox_state = _prox_step(
                    spec, momentum - step * grad, step * lam, dims, opts.prox, prox_state
                )
                diff = cand - momentum
                quad = loss_m + grad @ diff + (1.0 + opts.suff_decrease) * (diff @ diff) / (2.0 * step)
                loss_c = loss_from_matrix(cand, x, y, family)
                if loss_c <= quad + 1e-12 * max(1.0, abs(loss_c)) or step < 1e-14:
                    break
                step *= opts.step_shrink
                shrank_last = True
            total_prox_iters += prox_info.iterations
            obj_cand = loss_c + lam * reg_of(cand)

        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_momentum * t_momentum))
        momentum = cand + ((t_momentum - 1.0) / t_next) * (cand - theta)
        t_momentum = t_next
        theta = cand
        rel_change = abs(obj - obj_cand) / max(1.0, abs(obj))
        obj = obj_cand
        if obj < best_obj:
            best_obj, best_theta = obj, theta.copy()
        if rel_change <= opts.tol:
            # the objective can flatten before the iterate is stationary, so
            # also require a small prox fixed-point residual before stopping
            grad_here = gradient_from_matrix(theta, x, y, family)
            mapped, prox_info, prox_state = _prox_step(
                spec, theta - step * grad_here, step * lam, dims, opts.prox, prox_state
            )
            total_prox_iters += prox_info.iterations
            residual = float(np.linalg.norm(theta - mapped)) / max(1.0, float(np.linalg.norm(theta)))
            if residual <= opts.stationarity_tol:
                converged = True
                break

    diag = FitDiagnostics(
        iterations=iterations,
        objective=best_obj,
        rel_change=rel_change,
        converged=converged,
        step=step,
        prox_residual=prox_info.residual,
        prox_iterations=total_prox_iters,
    )
    return DenseTensor.from_flat(best_theta, dims), diag
