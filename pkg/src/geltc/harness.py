"""Experiment orchestration: JSON configs, seeded replications, CSV + manifest.

Output files (``<id>`` is the experiment id):

* ``<id>_summary.csv``  -- one row per round:
  ``round,cum_regret_mean,cum_regret_std,ratio_mean`` where the ratio divides
  the mean cumulative regret by the structure's theoretical growth rate at
  that round (constants dropped).
* ``<id>_reps.csv``     -- one row per replication with its seeds, derived
  parameters, final regret/ratio, and fit diagnostics.  Deterministic fields
  only, so reruns with the same config are byte-identical.
* ``<id>_manifest.json`` -- config echo, derived values, library versions,
  wall clock.

Comparison experiments write the same trio per algorithm
(``<id>_geltc_*`` / ``<id>_drlasso_*`` summaries share one manifest).

Replications fan out over a process pool; aggregation is ordered by
replication index regardless of completion order.  Per-replication seeds
derive from the base seed through the documented splitter in
:mod:`geltc.seeding`.
"""
from __future__ import annotations

import dataclasses
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import geltc

from .bandit import (
    BanditInstance,
    DerivedParams,
    DrLassoConfig,
    LambdaSchedule,
    RunRecord,
    Seeds,
    derive_run_parameters,
    gen_lasso_comparison_env,
    run_drlasso,
    run_geltc,
    theoretical_bound,
)
from .estimator import FitOptions
from .glm import GlmFamily
from .regularizers import EntryL1, FiberGroup, OverlappedNuclear, Regularizer, SliceNuclear
from .seeding import STREAM_CONTEXT, STREAM_REWARD, STREAM_TRUTH, STREAM_WIDTH, derive_seed

SCHEMA_VERSION = 1

_KINDS = {
    "overlapped_nuclear": OverlappedNuclear,
    "slice_nuclear": SliceNuclear,
    "entry_l1": EntryL1,
    "fiber_group": FiberGroup,
}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configs."""


@dataclass(frozen=True)
class ExperimentConfig:
    """A tensor-bandit regret experiment (one structure, one dimension setting)."""

    experiment_id: str
    kind: str
    dims: tuple[int, ...]
    T: int
    K: int = 20
    rank: int | None = None
    sparsity: int | None = None
    q: float = 2.0
    fiber_mode: int = 1
    family: str = "logistic"
    noise_scale: float | None = None
    delta: float = 0.01
    c_explore: float = 1.0
    c_lambda: float = 1.0
    n_replications: int = 10
    width_samples: int = 200
    base_seed: int = 0
    output_dir: str = "results"
    workers: int | None = None
    fit_max_iters: int = 2000
    fit_tol: float = 1e-8
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown structure kind {self.kind!r}")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        self.build_spec()  # fail fast on missing structure params
        self.build_family()

    def build_spec(self) -> Regularizer:
        if self.kind == "overlapped_nuclear":
            if self.rank is None:
                raise ConfigError("overlapped_nuclear requires 'rank'")
            return OverlappedNuclear(rank=self.rank)
        if self.kind == "slice_nuclear":
            if self.rank is None or self.sparsity is None:
                raise ConfigError("slice_nuclear requires 'rank' and 'sparsity'")
            return SliceNuclear(rank=self.rank, n_slices=self.sparsity)
        if self.kind == "entry_l1":
            if self.sparsity is None:
                raise ConfigError("entry_l1 requires 'sparsity'")
            return EntryL1(sparsity=self.sparsity)
        if self.sparsity is None:
            raise ConfigError("fiber_group requires 'sparsity'")
        return FiberGroup(sparsity=self.sparsity, mode=self.fiber_mode, q=self.q)

    def build_family(self) -> GlmFamily:
        return GlmFamily(self.family, self.noise_scale)

    def schedule(self) -> LambdaSchedule:
        return LambdaSchedule(
            delta=self.delta,
            noise_scale=self.build_family().noise_scale,
            c_lambda=self.c_lambda,
        )

    def fit_options(self) -> FitOptions:
        return FitOptions(max_iters=self.fit_max_iters, tol=self.fit_tol)

    def replication_seeds(self, rep: int) -> Seeds:
        return Seeds(
            truth=derive_seed(self.base_seed, rep, STREAM_TRUTH),
            context=derive_seed(self.base_seed, rep, STREAM_CONTEXT),
            reward=derive_seed(self.base_seed, rep, STREAM_REWARD),
        )


@dataclass(frozen=True)
class LassoComparisonConfig:
    """Head-to-head of the explore-then-commit agent against DR-Lasso on the
    degenerate vector environment."""

    experiment_id: str
    d: int
    sparsity: int
    rho2: float
    T: int
    K: int = 100
    noise_scale: float = 0.05
    delta: float = 0.01
    c_explore: float = 1.0
    c_lambda: float = 1.0
    n_replications: int = 10
    width_samples: int = 200
    base_seed: int = 0
    output_dir: str = "results"
    workers: int | None = None
    drlasso: dict = field(default_factory=dict)
    fit_max_iters: int = 2000
    fit_tol: float = 1e-8
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 0.0 <= self.rho2 < 1.0:
            raise ConfigError(f"rho2 must lie in [0, 1), got {self.rho2}")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        self.drlasso_config()

    def drlasso_config(self) -> DrLassoConfig:
        return DrLassoConfig(**self.drlasso)

    def schedule(self) -> LambdaSchedule:
        return LambdaSchedule(delta=self.delta, noise_scale=self.noise_scale, c_lambda=self.c_lambda)

    def replication_seeds(self, rep: int) -> Seeds:
        return Seeds(
            truth=derive_seed(self.base_seed, rep, STREAM_TRUTH),
            context=derive_seed(self.base_seed, rep, STREAM_CONTEXT),
            reward=derive_seed(self.base_seed, rep, STREAM_REWARD),
        )


def load_config(path) -> ExperimentConfig | LassoComparisonConfig:
    """Load a JSON config; the ``type`` field selects the experiment kind."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig | LassoComparisonConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    kind = raw.get("type", "tensor")
    body = {k: v for k, v in raw.items() if k != "type"}
    if "dims" in body:
        body["dims"] = tuple(body["dims"])
    try:
        if kind == "tensor":
            return ExperimentConfig(**body)
        if kind == "lasso_comparison":
            return LassoComparisonConfig(**body)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown experiment type {kind!r}")


@dataclass
class ExperimentSummary:
    experiment_id: str
    t1: int
    lam: float
    width: float
    final_regret_mean: float
    final_regret_std: float
    final_ratio_mean: float
    outputs: dict[str, str]
    wall_clock_s: float


@dataclass
class ComparisonSummary:
    experiment_id: str
    geltc_final_mean: float
    geltc_final_std: float
    drlasso_final_mean: float
    drlasso_final_std: float
    outputs: dict[str, str]
    wall_clock_s: float

    @property
    def pooled_std(self) -> float:
        return float(np.sqrt(0.5 * (self.geltc_final_std**2 + self.drlasso_final_std**2)))


def _run_tensor_replication(config_dict: dict, derived_tuple: tuple, rep: int) -> RunRecord:
    """Top-level worker so the process pool can pickle it."""
    config = config_from_dict(config_dict)
    derived = DerivedParams(*derived_tuple)
    instance = BanditInstance.generate(
        config.build_spec(),
        config.dims,
        config.K,
        config.T,
        config.build_family(),
        config.replication_seeds(rep),
    )
    return run_geltc(
        instance,
        config.schedule(),
        config.c_explore,
        config.fit_options(),
        derived=derived,
    )


def _run_comparison_replication(config_dict: dict, derived_tuple: tuple, rep: int):
    config = config_from_dict(config_dict)
    derived = DerivedParams(*derived_tuple)
    env = gen_lasso_comparison_env(
        config.K,
        config.d,
        config.sparsity,
        config.rho2,
        config.noise_scale,
        config.T,
        config.replication_seeds(rep),
    )
    ours = run_geltc(
        env,
        config.schedule(),
        config.c_explore,
        FitOptions(max_iters=config.fit_max_iters, tol=config.fit_tol),
        derived=derived,
    )
    baseline = run_drlasso(env, config.drlasso_config())
    return ours, baseline


def _fan_out(task, config_dict: dict, derived_tuple: tuple, n_reps: int, workers: int | None):
    if workers is None:
        import os

        workers = max(1, os.cpu_count() or 1)
    if workers == 1 or n_reps == 1:
        return [task(config_dict, derived_tuple, rep) for rep in range(n_reps)]
    with ProcessPoolExecutor(max_workers=min(workers, n_reps)) as pool:
        futures = [pool.submit(task, config_dict, derived_tuple, rep) for rep in range(n_reps)]
        return [f.result() for f in futures]  # ordered by replication index


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _summary_rows(records: list[RunRecord], bound: np.ndarray):
    cum = np.stack([r.cum_regret for r in records])
    mean = cum.mean(axis=0)
    std = cum.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(cum.shape[1])
    ratio = mean / bound
    for t in range(cum.shape[1]):
        yield (t + 1, float(mean[t]), float(std[t]), float(ratio[t]))


def _rep_rows(records: list[RunRecord], bound_final: float):
    for rep, r in enumerate(records):
        diag = r.fit_diagnostics
        yield (
            rep,
            r.seeds.truth,
            r.seeds.context,
            r.seeds.reward,
            r.t1,
            float(r.lam),
            float(r.width),
            float(r.final_regret),
            float(r.final_regret / bound_final),
            diag.iterations if diag else 0,
            int(diag.converged) if diag else 1,
            float(diag.objective) if diag else 0.0,
        )


_REPS_HEADER = [
    "rep",
    "truth_seed",
    "context_seed",
    "reward_seed",
    "t1",
    "lambda",
    "width",
    "final_cum_regret",
    "final_ratio",
    "fit_iterations",
    "fit_converged",
    "fit_objective",
]
_SUMMARY_HEADER = ["round", "cum_regret_mean", "cum_regret_std", "ratio_mean"]


def _versions() -> dict[str, str]:
    return {
        "geltc": geltc.__version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def run_experiment(config: ExperimentConfig, quiet: bool = False) -> ExperimentSummary:
    """Execute all replications of a tensor experiment and persist results."""
    start = time.perf_counter()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = config.build_spec()

    probe = BanditInstance.generate(
        spec, config.dims, config.K, config.T, config.build_family(), config.replication_seeds(0)
    )
    width_rng = np.random.Generator(
        np.random.PCG64(derive_seed(config.base_seed, STREAM_WIDTH))
    )
    derived = derive_run_parameters(
        probe, config.schedule(), config.c_explore, config.width_samples, width_rng
    )

    config_dict = config_to_dict(config)
    records = _fan_out(
        _run_tensor_replication,
        config_dict,
        dataclasses.astuple(derived),
        config.n_replications,
        config.workers,
    )

    rounds = np.arange(1, config.T + 1)
    bound = theoretical_bound(spec, config.dims, rounds, config.delta)
    summary_path = out_dir / f"{config.experiment_id}_summary.csv"
    reps_path = out_dir / f"{config.experiment_id}_reps.csv"
    manifest_path = out_dir / f"{config.experiment_id}_manifest.json"
    _write_csv(summary_path, _SUMMARY_HEADER, _summary_rows(records, bound))
    _write_csv(reps_path, _REPS_HEADER, _rep_rows(records, float(bound[-1])))

    finals = np.array([r.final_regret for r in records])
    summary = ExperimentSummary(
        experiment_id=config.experiment_id,
        t1=derived.t1,
        lam=derived.lam,
        width=derived.width,
        final_regret_mean=float(finals.mean()),
        final_regret_std=float(finals.std(ddof=1)) if len(finals) > 1 else 0.0,
        final_ratio_mean=float(finals.mean() / bound[-1]),
        outputs={
            "summary_csv": str(summary_path),
            "reps_csv": str(reps_path),
            "manifest": str(manifest_path),
        },
        wall_clock_s=time.perf_counter() - start,
    )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": config.experiment_id,
        "config": config_dict,
        "derived": {
            "width": derived.width,
            "width_stderr": derived.width_stderr,
            "t1": derived.t1,
            "lambda": derived.lam,
            "phi": spec.phi(config.dims),
        },
        "results": {
            "final_regret_mean": summary.final_regret_mean,
            "final_regret_std": summary.final_regret_std,
            "final_ratio_mean": summary.final_ratio_mean,
        },
        "versions": _versions(),
        "wall_clock_s": summary.wall_clock_s,
        "outputs": summary.outputs,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if not quiet:
        print(
            f"{config.experiment_id}: T1={derived.t1} lambda={derived.lam:.6g} "
            f"width={derived.width:.4g} final_regret={summary.final_regret_mean:.4g}"
            f" +/- {summary.final_regret_std:.3g} final_ratio={summary.final_ratio_mean:.4g}"
        )
    return summary


def run_lasso_comparison(config: LassoComparisonConfig, quiet: bool = False) -> ComparisonSummary:
    """Run the paired comparison and persist one summary CSV per algorithm."""
    start = time.perf_counter()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    probe = gen_lasso_comparison_env(
        config.K,
        config.d,
        config.sparsity,
        config.rho2,
        config.noise_scale,
        config.T,
        config.replication_seeds(0),
    )
    width_rng = np.random.Generator(np.random.PCG64(derive_seed(config.base_seed, STREAM_WIDTH)))
    derived = derive_run_parameters(
        probe, config.schedule(), config.c_explore, config.width_samples, width_rng
    )

    config_dict = config_to_dict(config)
    pairs = _fan_out(
        _run_comparison_replication,
        config_dict,
        dataclasses.astuple(derived),
        config.n_replications,
        config.workers,
    )
    ours = [p[0] for p in pairs]
    baseline = [p[1] for p in pairs]

    rounds = np.arange(1, config.T + 1)
    bound = theoretical_bound(EntryL1(sparsity=config.sparsity), (config.d,), rounds, config.delta)
    outputs: dict[str, str] = {}
    for name, records in (("geltc", ours), ("drlasso", baseline)):
        summary_path = out_dir / f"{config.experiment_id}_{name}_summary.csv"
        reps_path = out_dir / f"{config.experiment_id}_{name}_reps.csv"
        _write_csv(summary_path, _SUMMARY_HEADER, _summary_rows(records, bound))
        _write_csv(reps_path, _REPS_HEADER, _rep_rows(records, float(bound[-1])))
        outputs[f"{name}_summary_csv"] = str(summary_path)
        outputs[f"{name}_reps_csv"] = str(reps_path)

    finals_ours = np.array([r.final_regret for r in ours])
    finals_base = np.array([r.final_regret for r in baseline])
    manifest_path = out_dir / f"{config.experiment_id}_manifest.json"
    outputs["manifest"] = str(manifest_path)
    summary = ComparisonSummary(
        experiment_id=config.experiment_id,
        geltc_final_mean=float(finals_ours.mean()),
        geltc_final_std=float(finals_ours.std(ddof=1)) if len(finals_ours) > 1 else 0.0,
        drlasso_final_mean=float(finals_base.mean()),
        drlasso_final_std=float(finals_base.std(ddof=1)) if len(finals_base) > 1 else 0.0,
        outputs=outputs,
        wall_clock_s=time.perf_counter() - start,
    )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment_id": config.experiment_id,
        "config": config_dict,
        "derived": {
            "width": derived.width,
            "width_stderr": derived.width_stderr,
            "t1": derived.t1,
            "lambda": derived.lam,
        },
        "results": {
            "geltc_final_mean": summary.geltc_final_mean,
            "geltc_final_std": summary.geltc_final_std,
            "drlasso_final_mean": summary.drlasso_final_mean,
            "drlasso_final_std": summary.drlasso_final_std,
        },
        "versions": _versions(),
        "wall_clock_s": summary.wall_clock_s,
        "outputs": outputs,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    if not quiet:
        print(
            f"{config.experiment_id}: geltc={summary.geltc_final_mean:.4g}"
            f" +/- {summary.geltc_final_std:.3g}"
            f" drlasso={summary.drlasso_final_mean:.4g} +/- {summary.drlasso_final_std:.3g}"
        )
    return summary


def config_to_dict(config) -> dict:
    body = dataclasses.asdict(config)
    body["type"] = "tensor" if isinstance(config, ExperimentConfig) else "lasso_comparison"
    if "dims" in body:
        body["dims"] = list(body["dims"])
    return body
