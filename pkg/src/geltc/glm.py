"""Generalized-linear reward families: inverse link, cumulant, loss, sampling.

The reward mean is ``mu(<X, theta>)`` with ``mu`` the derivative of the
convex cumulant ``b``.  Three canonical families are supported:

* ``logistic`` -- Bernoulli rewards, ``mu(x) = 1 / (1 + exp(-x))``;
* ``poisson``  -- Poisson rewards, ``mu(x) = exp(x)``;
* ``gaussian`` -- identity link, additive ``N(0, R^2)`` noise.

``noise_scale`` is the sub-Gaussian parameter ``R`` fed into the penalty
schedules; for the Bernoulli family the centered noise lives in ``[-1, 1]``
so the default is ``R = 1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

from .tensor import DenseTensor, ShapeError, vectorize

_FAMILIES = ("logistic", "poisson", "gaussian")
_DEFAULT_NOISE = {"logistic": 0.5, "poisson": 1.0, "gaussian": 1.0}
_K_MU = {"logistic": 0.25, "poisson": math.e, "gaussian": 1.0}


@dataclass(frozen=True)
class GlmFamily:
    """Reward family tag plus its sub-Gaussian noise scale ``R``."""

    kind: str
    noise_scale: float | None = None

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; expected one of {_FAMILIES}")
        if self.noise_scale is None:
            object.__setattr__(self, "noise_scale", _DEFAULT_NOISE[self.kind])
        elif not self.noise_scale >= 0:
            raise ValueError("noise_scale must be non-negative")

    @property
    def k_mu(self) -> float:
        """Bound on ``|mu'(x)|`` over ``|x| <= 1``."""
        return _K_MU[self.kind]


def logistic(noise_scale: float = 0.5) -> GlmFamily:
    return GlmFamily("logistic", noise_scale)


def poisson(noise_scale: float = 1.0) -> GlmFamily:
    return GlmFamily("poisson", noise_scale)


def gaussian(noise_scale: float = 1.0) -> GlmFamily:
    return GlmFamily("gaussian", noise_scale)


def mu(family: GlmFamily, x):
    """Inverse link (the reward mean at linear predictor ``x``); increasing."""
    x = np.asarray(x, dtype=np.float64)
    if family.kind == "logistic":
        out = expit(x)
    elif family.kind == "poisson":
        out = np.exp(x)
    else:
        out = x.copy()
    return float(out) if out.ndim == 0 else out


def mu_prime(family: GlmFamily, x):
    """Derivative of the inverse link."""
    x = np.asarray(x, dtype=np.float64)
    if family.kind == "logistic":
        p = expit(x)
        out = p * (1.0 - p)
    elif family.kind == "poisson":
        out = np.exp(x)
    else:
        out = np.ones_like(x)
    return float(out) if out.ndim == 0 else out


def cumulant(family: GlmFamily, x):
    """Convex cumulant ``b`` with ``b' == mu`` (overflow-safe forms)."""
    x = np.asarray(x, dtype=np.float64)
    if family.kind == "logistic":
        out = np.logaddexp(0.0, x)  # log(1 + e^x) without overflow
    elif family.kind == "poisson":
        out = np.exp(x)
    else:
        out = 0.5 * x * x
    return float(out) if out.ndim == 0 else out


def sample_reward(family: GlmFamily, mean_arg: float, rng: np.random.Generator) -> float:
    """Draw one reward with mean ``mu(mean_arg)``."""
    if family.kind == "logistic":
        return float(rng.random() < expit(mean_arg))
    if family.kind == "poisson":
        return float(rng.poisson(math.exp(mean_arg)))
    return float(mean_arg + family.noise_scale * rng.standard_normal())


def _stack_contexts(contexts, dims=None) -> np.ndarray:
    if isinstance(contexts, np.ndarray):
        if contexts.ndim != 2:
            raise ShapeError("context matrix must be 2-D (samples x entries)")
        return contexts
    if len(contexts) == 0:
        raise ValueError("empty context list")
    mats = []
    for c in contexts:
        if dims is not None and c.dims != tuple(dims):
            raise ShapeError(f"context dims {c.dims} do not match {tuple(dims)}")
        mats.append(vectorize(c))
    return np.stack(mats)


def glm_loss(
    theta: DenseTensor,
    contexts: Sequence[DenseTensor] | np.ndarray,
    rewards,
    family: GlmFamily,
) -> float:
    """Mean negative quasi-log-likelihood ``mean(b(<X_t, theta>) - y_t <X_t, theta>)``."""
    x = _stack_contexts(contexts, theta.dims)
    y = np.asarray(rewards, dtype=np.float64)
    if len(y) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} contexts but {len(y)} rewards")
    if len(y) == 0:
        raise ValueError("empty data")
    return loss_from_matrix(vectorize(theta), x, y, family)


def glm_loss_gradient(
    theta: DenseTensor,
    contexts: Sequence[DenseTensor] | np.ndarray,
    rewards,
    family: GlmFamily,
) -> DenseTensor:
    """Gradient ``mean((mu(<X_t, theta>) - y_t) X_t)`` as a tensor."""
    x = _stack_contexts(contexts, theta.dims)
    y = np.asarray(rewards, dtype=np.float64)
    if len(y) != x.shape[0]:
        raise ValueError(f"{x.shape[0]} contexts but {len(y)} rewards")
    if len(y) == 0:
        raise ValueError("empty data")
    g = gradient_from_matrix(vectorize(theta), x, y, family)
    return DenseTensor.from_flat(g, theta.dims)


def loss_from_matrix(theta_vec: np.ndarray, x: np.ndarray, y: np.ndarray, family: GlmFamily) -> float:
    """Loss on pre-vectorized data (fast path used by the solver)."""
    z = x @ theta_vec
    return float(np.mean(cumulant(family, z) - y * z))


def gradient_from_matrix(
    theta_vec: np.ndarray, x: np.ndarray, y: np.ndarray, family: GlmFamily
) -> np.ndarray:
    """Gradient on pre-vectorized data (fast path used by the solver)."""
    z = x @ theta_vec
    return x.T @ (mu(family, z) - y) / x.shape[0]
