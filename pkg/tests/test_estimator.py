import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geltc.estimator import (
    FitOptions,
    LambdaSchedule,
    exploration_length,
    fit,
    gaussian_width_estimate,
    lambda_for,
)
from geltc.glm import gaussian, logistic
from geltc.regularizers import (
    EntryL1,
    FiberGroup,
    OverlappedNuclear,
    SliceNuclear,
    reg_prox,
    reg_value,
)
from geltc.tensor import DenseTensor, frob_norm, inner, vectorize

from conftest import random_tensor

# ---------------------------------------------------------------------------
# Independent re-implementations of the four penalty formulas, written as
# direct transliterations.  The production code must agree to 1e-12 relative.
# ---------------------------------------------------------------------------


def oracle_lambda_overlapped(R, delta, dims, T1):
    c_r = 0.5
    alpha = (c_r + 3) / (2 * c_r)
    N = len(dims)
    d = max(dims)
    log1 = math.log(4 * T1 * N / delta)
    log2 = math.log(2 * N * (d + d ** (N - 1)) / delta)
    return alpha * R * N / math.sqrt(T1) * math.sqrt(2 * log1 * log2)


def oracle_lambda_slice(R, delta, dims, T1):
    c_r = 1.0
    d1, d2, d3 = dims
    log1 = math.log(4 * T1 * d3 / delta)
    log2 = math.log(2 * d3 * (d1 + d2) / delta)
    return R * (c_r + 3) / (c_r * math.sqrt(T1)) * math.sqrt(log1 * log2)


def oracle_lambda_entry(R, delta, dims, T1):
    c_r = 1.0
    size = 1
    for d in dims:
        size *= d
    k = 1.0 / math.sqrt(size)
    return (c_r + 3) * R * k / (2 * c_r * math.sqrt(T1)) * math.sqrt(math.log(2 * size / delta))


def oracle_lambda_fiber(R, delta, dims, T1, q):
    c_r = 1.0
    alpha = (c_r + 3) / (2 * c_r)
    size = 1
    for d in dims:
        size *= d
    k = 1.0 / math.sqrt(size)
    d1 = dims[0]
    rest = size // d1
    front = alpha * R * k * (math.sqrt(d1) + math.sqrt(math.log(4 * rest / delta))) / math.sqrt(T1)
    return front * math.sqrt(2 * math.log(4 * T1 * rest / delta)) * max(1.0, d1 ** (0.5 - 1.0 / q))


class TestLambdaFor:
    def test_overlapped_frozen_regression_value(self):
        # direct evaluation of the closed-form schedule (cross-checked by the
        # independent transliteration below when this test was first written)
        lam = lambda_for(LambdaSchedule(0.01, 0.5, 1.0), OverlappedNuclear(rank=2), (8, 8, 8), 1000)
        assert lam == pytest.approx(2.869855744489747, rel=1e-13)
        assert lam == pytest.approx(oracle_lambda_overlapped(0.5, 0.01, (8, 8, 8), 1000), rel=1e-13)

    def test_decreasing_in_t1(self):
        sched = LambdaSchedule(0.05, 0.5, 1.0)
        spec = OverlappedNuclear(rank=2)
        assert lambda_for(sched, spec, (8, 8, 8), 4000) < lambda_for(sched, spec, (8, 8, 8), 1000)

    def test_entry_doubling_dimensions_reduces_lambda(self):
        sched = LambdaSchedule(0.01, 0.5, 1.0)
        small = lambda_for(sched, EntryL1(sparsity=3), (4, 4, 4), 1000)
        large = lambda_for(sched, EntryL1(sparsity=3), (8, 8, 8), 1000)
        assert large < small

    def test_matches_independent_implementation_on_grid(self):
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 50:
            t1 = int(rng.integers(10, 100_000))
            delta = float(rng.uniform(0.001, 0.5))
            noise = float(rng.uniform(0.01, 2.0))
            dims = tuple(int(d) for d in rng.integers(2, 16, size=3))
            q = float(rng.uniform(1.2, 4.0))
            sched = LambdaSchedule(delta, noise, 1.0)
            cases = [
                (OverlappedNuclear(rank=2), oracle_lambda_overlapped(noise, delta, dims, t1)),
                (SliceNuclear(rank=2, n_slices=1), oracle_lambda_slice(noise, delta, dims, t1)),
                (EntryL1(sparsity=1), oracle_lambda_entry(noise, delta, dims, t1)),
                (FiberGroup(sparsity=1, q=q), oracle_lambda_fiber(noise, delta, dims, t1, q)),
            ]
            for spec, expected in cases:
                assert lambda_for(sched, spec, dims, t1) == pytest.approx(expected, rel=1e-12)
                checked += 1

    def test_c_lambda_scales_linearly(self):
        spec = EntryL1(sparsity=2)
        base = lambda_for(LambdaSchedule(0.01, 0.5, 1.0), spec, (5, 5, 5), 100)
        scaled = lambda_for(LambdaSchedule(0.01, 0.5, 0.25), spec, (5, 5, 5), 100)
        assert scaled == pytest.approx(0.25 * base, rel=1e-14)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            LambdaSchedule(delta=1.5)
        with pytest.raises(ValueError):
            lambda_for(LambdaSchedule(), OverlappedNuclear(rank=1), (4, 4, 4), 0)

    @settings(max_examples=60, deadline=None)
    @given(
        t1=st.integers(1, 10**6),
        delta_pair=st.tuples(st.floats(1e-4, 0.4), st.floats(1.01, 4.0)),
    )
    def test_monotonicity_properties(self, t1, delta_pair):
        delta, factor = delta_pair
        spec = SliceNuclear(rank=1, n_slices=1)
        dims = (6, 7, 9)
        lam = lambda_for(LambdaSchedule(delta, 0.5, 1.0), spec, dims, t1)
        assert lambda_for(LambdaSchedule(delta, 0.5, 1.0), spec, dims, t1 + 1) < lam
        assert lambda_for(LambdaSchedule(min(delta * factor, 0.99), 0.5, 1.0), spec, dims, t1) < lam


class TestExplorationLength:
    def test_arithmetic_example(self):
        assert exploration_length(1.0, 4.0, 3.0, 1000) == 36

    def test_never_exceeds_ninety_percent(self):
        assert exploration_length(100.0, 50.0, 10.0, 200) == 180

    def test_at_least_one(self):
        assert exploration_length(1e-9, 1e-9, 1e-9, 100) == 1

    def test_horizon_too_short(self):
        with pytest.raises(ValueError):
            exploration_length(1.0, 1.0, 1.0, 1)

    @settings(max_examples=100, deadline=None)
    @given(
        c=st.floats(1e-6, 100.0),
        phi=st.floats(1e-6, 100.0),
        width=st.floats(0.0, 50.0),
        horizon=st.integers(2, 10**6),
    )
    def test_clamped_range(self, c, phi, width, horizon):
        t1 = exploration_length(c, phi, width, horizon)
        assert 1 <= t1 <= math.floor(0.9 * horizon)


class TestGaussianWidth:
    def test_one_dimensional_half_normal_mean(self):
        rng = np.random.default_rng(17)
        est = gaussian_width_estimate(EntryL1(), (1,), 4000, rng)
        assert est.mean == pytest.approx(math.sqrt(2 / math.pi), abs=4 * est.stderr + 0.01)

    def test_monotone_in_dims_for_entry_l1(self):
        small, large = [], []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            small.append(gaussian_width_estimate(EntryL1(), (5,), 50, rng).mean)
            rng = np.random.default_rng(seed)
            large.append(gaussian_width_estimate(EntryL1(), (50,), 50, rng).mean)
        assert np.mean(large) > np.mean(small)

    def test_entry_10x10_near_max_gaussian_asymptotic(self):
        rng = np.random.default_rng(23)
        est = gaussian_width_estimate(EntryL1(), (10, 10), 200, rng)
        target = math.sqrt(2 * math.log(100))
        assert abs(est.mean - target) <= 0.15 * target

    def test_auto_escalation_reduces_stderr(self):
        rng = np.random.default_rng(1)
        est = gaussian_width_estimate(EntryL1(), (2,), 2, rng, rel_se_target=0.01)
        assert est.n_samples > 2
        assert est.stderr <= 0.01 * est.mean

    @pytest.mark.parametrize(
        "spec",
        [OverlappedNuclear(), SliceNuclear(), EntryL1(), FiberGroup()],
        ids=["overlapped", "slice", "entry", "fiber"],
    )
    def test_default_samples_meet_stderr_target_at_8x8x8(self, spec):
        rng = np.random.default_rng(29)
        est = gaussian_width_estimate(spec, (8, 8, 8), 200, rng)
        assert est.n_samples == 200  # no escalation needed
        assert est.stderr < 0.05 * est.mean


class TestFit:
    def test_huge_lambda_gives_zero(self, rng):
        contexts = [random_tensor(rng, (3, 3)) for _ in range(40)]
        rewards = list(rng.random(40))
        grad_dual = np.abs(
            np.mean([(0.5 - y) * vectorize(c) for c, y in zip(contexts, rewards)], axis=0)
        ).max()
        theta, diag = fit(contexts, rewards, EntryL1(), 1e3 * grad_dual, logistic())
        assert frob_norm(theta) == 0.0
        assert diag.converged

    def test_gaussian_no_penalty_recovers_least_squares(self, rng):
        dims = (3, 3)
        theta_star = random_tensor(rng, dims)
        contexts = [random_tensor(rng, dims) for _ in range(500)]
        noise = 0.01 * rng.standard_normal(500)
        rewards = [inner(c, theta_star) + e for c, e in zip(contexts, noise)]
        theta, diag = fit(
            contexts,
            rewards,
            EntryL1(),
            0.0,
            gaussian(0.01),
            FitOptions(max_iters=20_000, tol=1e-14),
        )
        x = np.stack([vectorize(c) for c in contexts])
        ls, *_ = np.linalg.lstsq(x, np.asarray(rewards), rcond=None)
        assert np.linalg.norm(vectorize(theta) - ls) <= 1e-6 * max(1.0, np.linalg.norm(ls))
        assert frob_norm(DenseTensor(theta.array - theta_star.array)) < 0.05

    def test_logistic_entry_sparse_support_recovery(self):
        # planted s=3 sparse signal in 4x4x4, schedule-driven penalty,
        # support of the estimate should not wander off the truth
        dims = (4, 4, 4)
        spurious_counts = []
        missed_support = False
        for seed in range(10):
            rng = np.random.default_rng(1000 + seed)
            flat = np.zeros(64)
            idx = rng.choice(64, size=3, replace=False)
            flat[idx] = rng.uniform(0.5, 1.0, size=3)
            flat /= np.linalg.norm(flat)
            theta_star = DenseTensor.from_flat(flat, dims)
            n = 2000
            x = rng.standard_normal((n, 64))
            x /= np.linalg.norm(x, axis=1, keepdims=True)
            z = x @ flat
            y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(float)
            lam = lambda_for(LambdaSchedule(0.01, 0.5, 1.0), EntryL1(sparsity=3), dims, n)
            theta, _ = fit(x, y, EntryL1(sparsity=3), lam, logistic(), dims=dims)
            support = set(np.nonzero(np.abs(vectorize(theta)) > 1e-3)[0])
            spurious_counts.append(len(support - set(idx)))
            missed_support |= not support <= set(idx) | support
        assert np.mean(spurious_counts) <= 3.0

    def test_objective_monotone_and_stationary(self, rng):
        dims = (3, 3, 3)
        theta_star = random_tensor(rng, dims)
        contexts = [random_tensor(rng, dims) for _ in range(120)]
        rewards = [inner(c, theta_star) + 0.05 * rng.standard_normal() for c in contexts]
        spec = OverlappedNuclear(rank=2)
        lam = 0.01
        theta, diag = fit(contexts, rewards, spec, lam, gaussian(0.05))
        x = np.stack([vectorize(c) for c in contexts])
        y = np.asarray(rewards)
        from geltc.glm import glm_loss, glm_loss_gradient

        obj_hat = glm_loss(theta, contexts, rewards, gaussian(0.05)) + lam * reg_value(spec, theta)
        obj_zero = glm_loss(DenseTensor.zeros(dims), contexts, rewards, gaussian(0.05))
        assert obj_hat <= obj_zero + 1e-12
        grad = glm_loss_gradient(theta, contexts, rewards, gaussian(0.05))
        step = diag.step
        moved = DenseTensor(theta.array - step * grad.array)
        from geltc.regularizers import ProxOptions

        back = reg_prox(spec, moved, step * lam, ProxOptions(strict=False))
        residual = frob_norm(DenseTensor(theta.array - back.array)) / max(1.0, frob_norm(theta))
        assert residual < 1e-5

    def test_best_iterate_not_worse_than_zero(self, rng):
        dims = (2, 2, 2)
        contexts = [random_tensor(rng, dims) for _ in range(30)]
        rewards = list(rng.random(30))
        spec = EntryL1()
        lam = 0.01
        theta, diag = fit(contexts, rewards, spec, lam, logistic())
        from geltc.glm import glm_loss

        assert diag.objective <= glm_loss(DenseTensor.zeros(dims), contexts, rewards, logistic()) + 1e-12

    def test_nonconvergence_flagged_not_fatal(self, rng):
        dims = (3, 3)
        contexts = [random_tensor(rng, dims) for _ in range(50)]
        rewards = list(rng.random(50))
        theta, diag = fit(
            contexts, rewards, EntryL1(), 1e-4, logistic(), FitOptions(max_iters=2, tol=1e-16)
        )
        assert not diag.converged
        assert diag.iterations == 2

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            fit([], [], EntryL1(), 0.1, logistic())

    def test_negative_lambda_rejected(self, rng):
        with pytest.raises(ValueError):
            fit([random_tensor(rng, (2, 2))], [1.0], EntryL1(), -0.1, logistic())

    def test_warm_start_matches_cold_solution(self, rng):
        dims = (8,)
        contexts = [random_tensor(rng, dims) for _ in range(60)]
        rewards = list(rng.standard_normal(60))
        cold, _ = fit(contexts, rewards, EntryL1(), 0.02, gaussian())
        warm, diag = fit(contexts, rewards, EntryL1(), 0.02, gaussian(), theta0=vectorize(cold))
        assert frob_norm(DenseTensor(cold.array - warm.array)) < 1e-4
        assert diag.iterations <= 5
