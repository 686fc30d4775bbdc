import math

import numpy as np
import pytest

from geltc.glm import (
    GlmFamily,
    cumulant,
    gaussian,
    glm_loss,
    glm_loss_gradient,
    logistic,
    mu,
    mu_prime,
    poisson,
    sample_reward,
)
from geltc.tensor import DenseTensor, frob_norm, inner, vectorize

from conftest import random_tensor

FAMILIES = [logistic(), poisson(), gaussian(0.3)]


class TestMu:
    def test_logistic_at_zero(self):
        assert mu(logistic(), 0.0) == 0.5

    def test_poisson_at_zero(self):
        assert mu(poisson(), 0.0) == 1.0

    def test_logistic_ln3(self):
        assert mu(logistic(), math.log(3.0)) == pytest.approx(0.75, rel=1e-12)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_monotone_increasing(self, family):
        xs = np.linspace(-5, 5, 201)
        assert np.all(np.diff(mu(family, xs)) > 0)


class TestCumulant:
    def test_logistic_at_zero(self):
        assert cumulant(logistic(), 0.0) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_gaussian_quadratic(self):
        assert cumulant(gaussian(), 2.0) == 2.0

    def test_logistic_stable_at_large_argument(self):
        val = cumulant(logistic(), 30.0)
        assert val == pytest.approx(30.0 + math.log1p(math.exp(-30.0)), rel=1e-12)
        assert np.isfinite(cumulant(logistic(), 1000.0))

    @pytest.mark.parametrize("family", FAMILIES)
    def test_mu_is_derivative(self, family):
        xs = np.linspace(-5, 5, 101)
        h = 1e-6
        fd = (cumulant(family, xs + h) - cumulant(family, xs - h)) / (2 * h)
        got = mu(family, xs)
        assert np.max(np.abs(fd - got) / np.maximum(np.abs(got), 1e-12)) < 1e-6

    @pytest.mark.parametrize("family", FAMILIES)
    def test_convex(self, family):
        xs = np.linspace(-4, 4, 41)
        vals = cumulant(family, xs)
        assert np.all(np.diff(vals, 2) >= -1e-12)


class TestKmu:
    def test_constants(self):
        assert logistic().k_mu == 0.25
        assert poisson().k_mu == math.e
        assert gaussian().k_mu == 1.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_mu_prime_bounded_on_unit_interval(self, family):
        xs = np.linspace(-1, 1, 201)
        assert np.all(np.abs(mu_prime(family, xs)) <= family.k_mu + 1e-12)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_mu_prime_matches_finite_differences(self, family):
        xs = np.linspace(-3, 3, 61)
        h = 1e-6
        fd = (mu(family, xs + h) - mu(family, xs - h)) / (2 * h)
        assert np.allclose(fd, mu_prime(family, xs), rtol=1e-5, atol=1e-8)


class TestDefaults:
    def test_bernoulli_default_noise_scale(self):
        assert GlmFamily("logistic").noise_scale == 0.5

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            GlmFamily("probit")


class TestSampleReward:
    def test_saturated_probability(self, rng):
        assert all(sample_reward(logistic(), -1e9, rng) == 0.0 for _ in range(100))

    def test_degenerate_gaussian(self, rng):
        assert sample_reward(gaussian(0.0), 1.25, rng) == 1.25

    def test_logistic_monte_carlo_mean(self):
        rng = np.random.default_rng(5)
        draws = [sample_reward(logistic(), 0.0, rng) for _ in range(100_000)]
        assert np.mean(draws) == pytest.approx(0.5, abs=0.005)

    @pytest.mark.parametrize(
        "family,arg", [(logistic(), 0.4), (poisson(), 0.2), (gaussian(0.5), -0.3)]
    )
    def test_mean_consistency(self, family, arg):
        rng = np.random.default_rng(11)
        n = 100_000
        draws = np.array([sample_reward(family, arg, rng) for _ in range(n)])
        se = draws.std(ddof=1) / math.sqrt(n)
        assert abs(draws.mean() - mu(family, arg)) <= 4 * se + 1e-9


class TestLoss:
    def test_single_sample_logistic_at_zero(self, rng):
        theta = DenseTensor.zeros((2, 2))
        ctx = [random_tensor(rng, (2, 2))]
        assert glm_loss(theta, ctx, [0.0], logistic()) == pytest.approx(math.log(2.0))

    def test_noiseless_gaussian_plug_in_identity(self, rng):
        theta = random_tensor(rng, (3, 2))
        contexts = [random_tensor(rng, (3, 2)) for _ in range(20)]
        rewards = [inner(c, theta) for c in contexts]
        # with y = <X, theta>: mean(z^2/2 - z^2) = -mean(z^2)/2
        expected = -np.mean([r * r for r in rewards]) / 2.0
        assert glm_loss(theta, contexts, rewards, gaussian()) == pytest.approx(expected, rel=1e-12)

    def test_repetition_invariance(self, rng):
        theta = random_tensor(rng, (2, 3))
        contexts = [random_tensor(rng, (2, 3)) for _ in range(7)]
        rewards = list(rng.standard_normal(7))
        once = glm_loss(theta, contexts, rewards, logistic())
        twice = glm_loss(theta, contexts * 2, rewards * 2, logistic())
        assert twice == pytest.approx(once, rel=1e-12)

    def test_empty_data_rejected(self, rng):
        with pytest.raises(ValueError):
            glm_loss(random_tensor(rng, (2, 2)), [], [], logistic())

    def test_length_mismatch_rejected(self, rng):
        theta = random_tensor(rng, (2, 2))
        with pytest.raises(ValueError):
            glm_loss(theta, [random_tensor(rng, (2, 2))], [1.0, 2.0], logistic())

    def test_convexity_probe(self, rng):
        contexts = [random_tensor(rng, (3, 3)) for _ in range(15)]
        rewards = list(rng.random(15))
        for _ in range(25):
            t1, t2 = random_tensor(rng, (3, 3)), random_tensor(rng, (3, 3))
            alpha = float(rng.uniform(0.05, 0.95))
            mix = DenseTensor(alpha * t1.array + (1 - alpha) * t2.array)
            lhs = glm_loss(mix, contexts, rewards, logistic())
            rhs = alpha * glm_loss(t1, contexts, rewards, logistic()) + (1 - alpha) * glm_loss(
                t2, contexts, rewards, logistic()
            )
            assert lhs <= rhs + 1e-10


class TestGradient:
    def test_zero_theta_half_rewards(self, rng):
        theta = DenseTensor.zeros((2, 2, 2))
        contexts = [random_tensor(rng, (2, 2, 2)) for _ in range(6)]
        grad = glm_loss_gradient(theta, contexts, [0.5] * 6, logistic())
        assert frob_norm(grad) < 1e-15

    def test_finite_difference_match(self, rng):
        theta = random_tensor(rng, (3, 3, 3))
        contexts = [random_tensor(rng, (3, 3, 3)) for _ in range(12)]
        rewards = list(rng.random(12))
        grad = vectorize(glm_loss_gradient(theta, contexts, rewards, logistic()))
        theta_vec = vectorize(theta)
        h = 1e-6
        for i in rng.choice(27, size=10, replace=False):
            up, down = theta_vec.copy(), theta_vec.copy()
            up[i] += h
            down[i] -= h
            fd = (
                glm_loss(DenseTensor.from_flat(up, theta.dims), contexts, rewards, logistic())
                - glm_loss(DenseTensor.from_flat(down, theta.dims), contexts, rewards, logistic())
            ) / (2 * h)
            assert fd == pytest.approx(grad[i], rel=1e-4, abs=1e-9)

    def test_gaussian_reduces_to_least_squares_residual(self, rng):
        theta = random_tensor(rng, (3, 2))
        contexts = [random_tensor(rng, (3, 2)) for _ in range(9)]
        rewards = list(rng.standard_normal(9))
        grad = glm_loss_gradient(theta, contexts, rewards, gaussian())
        manual = np.zeros(6)
        for c, y in zip(contexts, rewards):
            manual += (inner(c, theta) - y) * vectorize(c)
        manual /= 9
        assert np.allclose(vectorize(grad), manual, rtol=1e-12, atol=1e-14)
