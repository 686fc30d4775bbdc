"""Explore-then-commit bandits for high-dimensional generalized-linear tensor
models with weakly decomposable regularizers."""

__version__ = "0.1.0"

from .bandit import (
    BanditInstance,
    DerivedParams,
    DrLassoConfig,
    LassoCompEnv,
    RunRecord,
    Seeds,
    derive_run_parameters,
    gen_context_set,
    gen_lasso_comparison_env,
    gen_true_parameter,
    optimal_arm,
    run_drlasso,
    run_geltc,
    theoretical_bound,
)
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
from .glm import GlmFamily, cumulant, gaussian, glm_loss, glm_loss_gradient, logistic, mu, mu_prime, poisson, sample_reward
from .regularizers import (
    EntryL1,
    FiberGroup,
    OverlappedNuclear,
    ProxConvergenceError,
    ProxOptions,
    Regularizer,
    RegularizerSpec,
    SliceNuclear,
    compatibility_phi,
    eta,
    reg_dual,
    reg_prox,
    reg_value,
)
from .tensor import (
    DenseTensor,
    Matricization,
    ShapeError,
    frob_norm,
    from_vector,
    hosvd_truncate,
    inner,
    matricize,
    mode_product,
    multilinear_ranks,
    tensorize,
    vectorize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
