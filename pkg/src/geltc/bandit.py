"""Synthetic bandit environments, the explore-then-commit agent, regret bounds,
and the doubly-robust Lasso baseline.

Randomness is split into three named streams per run:

* truth   -- generates the hidden parameter tensor;
* context -- generates every per-round arm context set (both phases);
* reward  -- reward noise, interleaved with the agent's uniform arm picks
  during exploration (one ``integers`` draw, then one reward draw per round).

Given the same seeds and configuration a run is bit-for-bit reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .estimator import (
    FitDiagnostics,
    FitOptions,
    LambdaSchedule,
    WidthEstimate,
    exploration_length,
    fit,
    gaussian_width_estimate,
    lambda_for,
)
from .glm import GlmFamily, gaussian, mu, sample_reward
from .regularizers import EntryL1, FiberGroup, OverlappedNuclear, Regularizer, SliceNuclear, eta
from .tensor import (
    DenseTensor,
    Matricization,
    ShapeError,
    frob_norm,
    hosvd_truncate,
    matricize,
    tensorize,
    vectorize,
)


@dataclass(frozen=True)
class Seeds:
    truth: int
    context: int
    reward: int

    def as_dict(self) -> dict[str, int]:
        return {"truth": self.truth, "context": self.context, "reward": self.reward}


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def gen_true_parameter(spec: Regularizer, dims, rng: np.random.Generator) -> DenseTensor:
    """Draw a unit-Frobenius-norm parameter satisfying the declared structure."""
    dims = tuple(int(d) for d in dims)
    spec.check_dims(dims)
    if isinstance(spec, OverlappedNuclear):
        if spec.rank is None or spec.rank > min(dims):
            raise ValueError(f"rank {spec.rank} infeasible for dims {dims}")
        raw = DenseTensor(rng.standard_normal(dims))
        arr = hosvd_truncate(raw, (spec.rank,) * len(dims)).array.copy()
    elif isinstance(spec, SliceNuclear):
        d1, d2, d3 = dims
        s, r = spec.n_slices, spec.rank
        if s is None or r is None or s > d3 or r > min(d1, d2):
            raise ValueError(f"slice params (s={s}, r={r}) infeasible for dims {dims}")
        arr = np.zeros(dims)
        idx = rng.choice(d3, size=s, replace=False)
        for k in idx:
            arr[:, :, k] = rng.standard_normal((d1, r)) @ rng.standard_normal((r, d2))
    elif isinstance(spec, EntryL1):
        size = int(np.prod(dims))
        s = spec.sparsity
        if s is None or s > size:
            raise ValueError(f"sparsity {s} infeasible for dims {dims}")
        flat = np.zeros(size)
        idx = rng.choice(size, size=s, replace=False)
        flat[idx] = rng.uniform(0.0, 1.0, size=s)
        arr = flat.reshape(dims, order="F")
    elif isinstance(spec, FiberGroup):
        s = spec.sparsity
        n_fibers = int(np.prod(dims)) // dims[spec.mode - 1]
        if s is None or s > n_fibers:
            raise ValueError(f"sparsity {s} infeasible for dims {dims}")
        mat = np.zeros((dims[spec.mode - 1], n_fibers))
        idx = rng.choice(n_fibers, size=s, replace=False)
        mat[:, idx] = rng.standard_normal((dims[spec.mode - 1], s))
        arr = tensorize(Matricization(spec.mode, mat), dims).array.copy()
    else:
        raise TypeError(f"unsupported structure kind {type(spec).__name__}")
    norm = np.linalg.norm(arr)
    if norm == 0.0:
        raise RuntimeError("degenerate zero draw for the true parameter")
    return DenseTensor(arr / norm)


def _verify_structure(spec: Regularizer, theta: DenseTensor, tol: float = 1e-8) -> None:
    if isinstance(spec, OverlappedNuclear):
        for n in range(1, theta.order + 1):
            s = np.linalg.svd(matricize(theta, n).matrix, compute_uv=False)
            if np.any(s[spec.rank :] > tol):
                raise ValueError(f"mode-{n} rank exceeds {spec.rank}")
    elif isinstance(spec, SliceNuclear):
        slices = np.moveaxis(theta.array, 2, 0)
        norms = np.linalg.norm(slices, axis=(1, 2))
        if int(np.sum(norms > tol)) != spec.n_slices:
            raise ValueError("nonzero slice count does not match the declared sparsity")
        for k in np.nonzero(norms > tol)[0]:
            s = np.linalg.svd(slices[k], compute_uv=False)
            if np.any(s[spec.rank :] > tol):
                raise ValueError(f"slice {k} rank exceeds {spec.rank}")
    elif isinstance(spec, EntryL1):
        if int(np.sum(np.abs(theta.array) > tol)) != spec.sparsity:
            raise ValueError("nonzero entry count does not match the declared sparsity")
    elif isinstance(spec, FiberGroup):
        fib = matricize(theta, spec.mode).matrix
        if int(np.sum(np.linalg.norm(fib, axis=0) > tol)) != spec.sparsity:
            raise ValueError("nonzero fiber count does not match the declared sparsity")


def _unit_sphere_rows(rng: np.random.Generator, k: int, size: int) -> np.ndarray:
    """K vectorized contexts, uniform on the unit sphere (rows of shape ``size``)."""
    mat = rng.standard_normal((k, size))
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    return mat


def gen_context_set(k: int, dims, rng: np.random.Generator) -> list[DenseTensor]:
    """K independent unit-Frobenius-norm Gaussian tensors (uniform on the sphere)."""
    if k < 2:
        raise ValueError("need at least two arms")
    dims = tuple(int(d) for d in dims)
    mat = _unit_sphere_rows(rng, k, int(np.prod(dims)))
    return [DenseTensor.from_flat(row, dims) for row in mat]


def optimal_arm(contexts, theta_star) -> int:
    """Index of the context with the largest inner product (ties -> lowest index)."""
    if isinstance(contexts, np.ndarray):
        ips = contexts @ (theta_star if isinstance(theta_star, np.ndarray) else vectorize(theta_star))
    else:
        if len(contexts) == 0:
            raise ValueError("empty context set")
        stacked = np.stack([vectorize(c) for c in contexts])
        ips = stacked @ vectorize(theta_star)
    return int(np.argmax(ips))


@dataclass(frozen=True)
class BanditInstance:
    """A synthetic tensor bandit problem: structure, truth, arms, horizon."""

    spec: Regularizer
    dims: tuple[int, ...]
    K: int
    T: int
    family: GlmFamily
    theta_star: DenseTensor
    seeds: Seeds

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.K < 2:
            raise ValueError("need at least two arms")
        if self.T < 2:
            raise ValueError("horizon must be at least 2")
        if self.theta_star.dims != self.dims:
            raise ShapeError("theta_star dims do not match the instance dims")
        if frob_norm(self.theta_star) > 1.0 + 1e-9:
            raise ValueError("theta_star must have Frobenius norm at most 1")
        _verify_structure(self.spec, self.theta_star)

    @classmethod
    def generate(cls, spec, dims, K, T, family, seeds: Seeds) -> "BanditInstance":
        theta = gen_true_parameter(spec, dims, _rng(seeds.truth))
        return cls(spec=spec, dims=tuple(dims), K=K, T=T, family=family, theta_star=theta, seeds=seeds)

    def draw_context_matrix(self, rng: np.random.Generator) -> np.ndarray:
        return _unit_sphere_rows(rng, self.K, int(np.prod(self.dims)))

    def draw_context_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` rounds of context sets in one draw; consumes the stream
        exactly like ``n`` sequential :meth:`draw_context_matrix` calls."""
        block = rng.standard_normal((n, self.K, int(np.prod(self.dims))))
        block /= np.linalg.norm(block, axis=2, keepdims=True)
        return block


@dataclass
class RunRecord:
    """Per-round trace plus the scalars that determined the run."""

    algorithm: str
    chosen_arms: np.ndarray
    chosen_inner: np.ndarray
    inst_regret: np.ndarray
    cum_regret: np.ndarray
    t1: int
    lam: float
    width: float
    width_stderr: float
    seeds: Seeds
    fit_diagnostics: FitDiagnostics | None = None
    wall_clock_s: float = 0.0

    @property
    def final_regret(self) -> float:
        return float(self.cum_regret[-1])


@dataclass(frozen=True)
class DerivedParams:
    """Width/exploration/penalty values shared by all replications of a config."""

    width: float
    width_stderr: float
    t1: int
    lam: float


def derive_run_parameters(
    env,
    schedule: LambdaSchedule,
    c_explore: float = 1.0,
    width_samples: int = 200,
    width_rng: np.random.Generator | None = None,
) -> DerivedParams:
    """Estimate the width and turn it into the exploration budget and penalty."""
    west = gaussian_width_estimate(env.spec, env.dims, width_samples, width_rng)
    phi = env.spec.phi(env.dims)
    t1 = exploration_length(c_explore, phi, west.mean, env.T)
    lam = lambda_for(schedule, env.spec, env.dims, t1)
    return DerivedParams(width=west.mean, width_stderr=west.stderr, t1=t1, lam=lam)


def run_geltc(
    env,
    schedule: LambdaSchedule | None = None,
    c_explore: float = 1.0,
    fit_options: FitOptions | None = None,
    width_samples: int = 200,
    derived: DerivedParams | None = None,
    theta_override: DenseTensor | None = None,
) -> RunRecord:
    """Run explore-then-commit on ``env`` and return the full regret trace.

    Phase 1 plays uniformly at random for ``T1`` rounds and records the chosen
    context/reward pairs.  A single penalized fit produces the estimate, and
    phase 2 greedily plays the arm maximizing the estimated mean (argmax of
    the inner product, since the inverse link is increasing; ties break to
    the lowest index).  Regret is the realized mean gap against the per-round
    optimal arm, never the sampled rewards.

    ``env`` may be a :class:`BanditInstance` or any object with the same
    ``spec/dims/K/T/family/theta_star/seeds/draw_context_matrix`` surface.
    ``derived`` (width, T1, lambda) can be precomputed and shared across
    replications; otherwise it is estimated here from a truth-seed-derived
    stream.  ``theta_override`` skips the fit (diagnostic oracle agent).
    """
    start = time.perf_counter()
    schedule = schedule or LambdaSchedule(noise_scale=env.family.noise_scale)
    if derived is None:
        from .seeding import STREAM_WIDTH, derive_seed

        width_rng = _rng(derive_seed(env.seeds.truth, STREAM_WIDTH))
        derived = derive_run_parameters(env, schedule, c_explore, width_samples, width_rng)
    t1, lam = derived.t1, derived.lam
    horizon, k_arms = env.T, env.K
    theta_star_vec = vectorize(env.theta_star)
    size = theta_star_vec.size

    rng_ctx = _rng(env.seeds.context)
    rng_rew = _rng(env.seeds.reward)

    chosen = np.zeros(horizon, dtype=np.int64)
    chosen_inner = np.zeros(horizon)
    inst_regret = np.zeros(horizon)
    explore_x = np.zeros((t1, size))
    explore_y = np.zeros(t1)
    block_size = 256

    t = 0
    while t < t1:
        n = min(block_size, t1 - t)
        ctx_block = env.draw_context_block(rng_ctx, n)
        ips_star_block = ctx_block @ theta_star_vec
        best_mu = mu(env.family, ips_star_block.max(axis=1))
        for i in range(n):
            arm = int(rng_rew.integers(k_arms))
            explore_x[t + i] = ctx_block[i, arm]
            explore_y[t + i] = sample_reward(env.family, float(ips_star_block[i, arm]), rng_rew)
            chosen[t + i] = arm
            chosen_inner[t + i] = ips_star_block[i, arm]
        inst_regret[t : t + n] = best_mu - mu(env.family, chosen_inner[t : t + n])
        t += n

    diagnostics = None
    if theta_override is not None:
        theta_hat_vec = vectorize(theta_override)
    else:
        theta_hat, diagnostics = fit(
            explore_x, explore_y, env.spec, lam, env.family, fit_options, dims=env.dims
        )
        theta_hat_vec = vectorize(theta_hat)

    while t < horizon:
        n = min(block_size, horizon - t)
        ctx_block = env.draw_context_block(rng_ctx, n)
        ips_star_block = ctx_block @ theta_star_vec
        arms = np.argmax(ctx_block @ theta_hat_vec, axis=1)
        picked = ips_star_block[np.arange(n), arms]
        chosen[t : t + n] = arms
        chosen_inner[t : t + n] = picked
        inst_regret[t : t + n] = mu(env.family, ips_star_block.max(axis=1)) - mu(env.family, picked)
        t += n

    return RunRecord(
        algorithm="geltc",
        chosen_arms=chosen,
        chosen_inner=chosen_inner,
        inst_regret=inst_regret,
        cum_regret=np.cumsum(inst_regret),
        t1=t1,
        lam=lam,
        width=derived.width,
        width_stderr=derived.width_stderr,
        seeds=env.seeds,
        fit_diagnostics=diagnostics,
        wall_clock_s=time.perf_counter() - start,
    )


def theoretical_bound(spec: Regularizer, dims, horizon, delta: float = 0.01):
    """Growth-rate denominator ``B_T`` for the regret-to-bound ratio curves.

    Constants are dropped, matching the convention of the ratio plots.
    ``horizon`` may be a scalar or an array of round indices.
    """
    dims = tuple(int(d) for d in dims)
    t = np.asarray(horizon, dtype=np.float64)
    if isinstance(spec, OverlappedNuclear):
        d = max(dims)
        out = d ** (len(dims) / 3.0) * spec.rank ** (1.0 / 3.0) * t ** (2.0 / 3.0)
    elif isinstance(spec, SliceNuclear):
        d = max(dims)
        out = d * spec.rank ** (1.0 / 3.0) * t ** (2.0 / 3.0)
    elif isinstance(spec, EntryL1):
        size = float(np.prod(dims))
        out = spec.sparsity ** (1.0 / 3.0) * t ** (2.0 / 3.0) * math.log(size) ** (1.0 / 3.0)
    elif isinstance(spec, FiberGroup):
        d_fiber = dims[spec.mode - 1]
        rest = float(np.prod(dims)) / d_fiber
        out = (
            eta(d_fiber, 1.0 / spec.q - 0.5) ** (4.0 / 3.0)
            * max(d_fiber, math.log(4.0 * rest / delta)) ** (1.0 / 3.0)
            * spec.sparsity ** (1.0 / 3.0)
            * t ** (2.0 / 3.0)
        )
    else:
        raise TypeError(f"unsupported structure kind {type(spec).__name__}")
    return float(out) if np.ndim(horizon) == 0 else out


@dataclass(frozen=True)
class LassoCompEnv:
    """Vector bandit with cross-arm equicorrelated Gaussian contexts.

    Per round the arm matrix ``X`` has shape ``(K, d)``: each feature column
    is ``N(0, V)`` across arms with ``V(i,i) = 1`` and ``V(i,j) = rho2``.
    The truth has ``s`` nonzero coordinates drawn uniformly from ``[0, 1]``
    (not normalized) and rewards are Gaussian with scale ``R``.  The agent
    treats rows as order-1 tensors.
    """

    K: int
    d: int
    sparsity: int
    rho2: float
    T: int
    family: GlmFamily
    theta_star: DenseTensor
    seeds: Seeds
    spec: Regularizer = field(default_factory=EntryL1)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.d,)

    def draw_context_matrix(self, rng: np.random.Generator) -> np.ndarray:
        return self.draw_context_block(rng, 1)[0]

    def draw_context_block(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # one shared factor plus an independent one per arm reproduces the
        # equicorrelated covariance: Var = rho2 + (1 - rho2), Cov = rho2
        draws = rng.standard_normal((n, self.K + 1, self.d))
        shared = draws[:, :1, :]
        own = draws[:, 1:, :]
        return math.sqrt(self.rho2) * shared + math.sqrt(1.0 - self.rho2) * own


def gen_lasso_comparison_env(
    K: int, d: int, s: int, rho2: float, noise_scale: float, T: int, seeds: Seeds
) -> LassoCompEnv:
    """Build the degenerate (order-1) comparison environment."""
    if not 0.0 <= rho2 < 1.0:
        raise ValueError(f"rho2 must lie in [0, 1), got {rho2}")
    rng = _rng(seeds.truth)
    theta = np.zeros(d)
    idx = rng.choice(d, size=s, replace=False)
    theta[idx] = rng.uniform(0.0, 1.0, size=s)
    return LassoCompEnv(
        K=K,
        d=d,
        sparsity=s,
        rho2=rho2,
        T=T,
        family=gaussian(noise_scale),
        theta_star=DenseTensor(theta),
        seeds=seeds,
        spec=EntryL1(sparsity=s),
    )


@dataclass(frozen=True)
class DrLassoConfig:
    """Hyperparameters of the doubly-robust Lasso baseline (all config keys)."""

    explore_scale: float = 1.0   # z_t = min(1, explore_scale * t**-explore_decay)
    explore_decay: float = 0.5
    lam2: float = 0.5            # penalty scale: lam2 * sqrt((log t + log d) / t)
    weight_cap: float = 2.0      # cap on the importance weight 1 / (K * propensity)
    refit_every: int = 1
    fit_max_iters: int = 200
    fit_tol: float = 1e-7


def run_drlasso(env: LassoCompEnv, config: DrLassoConfig | None = None) -> RunRecord:
    """Doubly-robust Lasso bandit on the vector environment.

    Mixes uniform exploration with greedy play, builds doubly-robust pseudo
    rewards from the across-arm average context, and refits an l1-penalized
    least squares estimate every round on the pseudo-reward regression.
    The importance weight of the correction term is capped at
    ``config.weight_cap``; uncapped weights grow like the inverse exploration
    probability and swamp the regression with variance.
    """
    start = time.perf_counter()
    config = config or DrLassoConfig()
    rng_ctx = _rng(env.seeds.context)
    rng_rew = _rng(env.seeds.reward)
    theta_vec = vectorize(env.theta_star)
    horizon, k_arms, d = env.T, env.K, env.d

    beta = np.zeros(d)
    xbar = np.zeros((horizon, d))
    pseudo = np.zeros(horizon)
    chosen = np.zeros(horizon, dtype=np.int64)
    chosen_inner = np.zeros(horizon)
    inst_regret = np.zeros(horizon)
    spec = EntryL1()
    opts = FitOptions(max_iters=config.fit_max_iters, tol=config.fit_tol)
    last_diag: FitDiagnostics | None = None

    for t in range(horizon):
        ctx = env.draw_context_matrix(rng_ctx)
        ips_star = ctx @ theta_vec
        best = int(np.argmax(ips_star))
        greedy = int(np.argmax(ctx @ beta))
        z_t = min(1.0, config.explore_scale * (t + 1) ** (-config.explore_decay))
        if rng_rew.random() < z_t:
            arm = int(rng_rew.integers(k_arms))
        else:
            arm = greedy
        propensity = z_t / k_arms + (1.0 - z_t) * (1.0 if arm == greedy else 0.0)
        reward = float(ips_star[arm] + env.family.noise_scale * rng_rew.standard_normal())
        weight = min(1.0 / (k_arms * propensity), config.weight_cap)
        xbar[t] = ctx.mean(axis=0)
        pseudo[t] = xbar[t] @ beta + weight * (reward - ctx[arm] @ beta)
        chosen[t] = arm
        chosen_inner[t] = ips_star[arm]
        inst_regret[t] = ips_star[best] - ips_star[arm]

        if (t + 1) % config.refit_every == 0:
            lam2_t = config.lam2 * math.sqrt((math.log(t + 1) + math.log(d)) / (t + 1))
            theta_hat, last_diag = fit(
                xbar[: t + 1],
                pseudo[: t + 1],
                spec,
                lam2_t,
                env.family,
                opts,
                dims=(d,),
                theta0=beta,
            )
            beta = vectorize(theta_hat)

    return RunRecord(
        algorithm="drlasso",
        chosen_arms=chosen,
        chosen_inner=chosen_inner,
        inst_regret=inst_regret,
        cum_regret=np.cumsum(inst_regret),
        t1=0,
        lam=float("nan"),
        width=float("nan"),
        width_stderr=float("nan"),
        seeds=env.seeds,
        fit_diagnostics=last_diag,
        wall_clock_s=time.perf_counter() - start,
    )
