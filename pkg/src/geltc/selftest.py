"""Fast invariant suite behind ``geltc selftest`` (runs in well under a minute)."""
from __future__ import annotations

import tempfile
import time
from pathlib import Path

import numpy as np

from .bandit import BanditInstance, Seeds, run_geltc
from .estimator import LambdaSchedule, lambda_for
from .glm import GlmFamily, cumulant, mu
from .regularizers import EntryL1, FiberGroup, OverlappedNuclear, SliceNuclear, soft_threshold
from .tensor import DenseTensor, frob_norm, hosvd_truncate, inner, matricize, mode_product


def _check(name: str, ok: bool, detail: str = "") -> bool:
    status = "ok" if ok else "FAIL"
    print(f"  [{status}] {name}" + (f" ({detail})" if detail and not ok else ""))
    return ok


def run_selftest() -> int:
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    passed = True

    # tensor algebra identities on random instances
    ok = True
    for _ in range(20):
        dims = tuple(rng.integers(2, 5, size=3))
        a = DenseTensor(rng.standard_normal(dims))
        b = DenseTensor(rng.standard_normal(dims))
        ok &= abs(inner(a, b) - inner(b, a)) < 1e-12
        ok &= abs(inner(a, b)) <= frob_norm(a) * frob_norm(b) + 1e-12
        for n in range(1, 4):
            m = matricize(a, n)
            ok &= abs(np.linalg.norm(m.matrix) - frob_norm(a)) < 1e-10
            factor = rng.standard_normal((3, dims[n - 1]))
            lhs = matricize(mode_product(a, factor, n), n).matrix
            ok &= np.allclose(lhs, factor @ m.matrix, rtol=1e-12, atol=1e-12)
    passed &= _check("tensor algebra identities", ok)

    # truncation is idempotent and rank-capping
    a = DenseTensor(rng.standard_normal((5, 5, 5)))
    low = hosvd_truncate(a, (2, 2, 2))
    again = hosvd_truncate(low, (2, 2, 2))
    ok = frob_norm(DenseTensor(low.array - again.array)) < 1e-8 * max(1.0, frob_norm(low))
    for n in range(1, 4):
        s = np.linalg.svd(matricize(low, n).matrix, compute_uv=False)
        ok &= bool(np.all(s[2:] < 1e-8))
    passed &= _check("rank truncation idempotent + rank caps", ok)

    # prox against the entrywise oracle
    vals = rng.standard_normal((4, 3, 2))
    out = EntryL1().prox(DenseTensor(vals), 0.3)
    ok = np.allclose(out.array, soft_threshold(vals, 0.3), rtol=0, atol=0)
    passed &= _check("entrywise prox equals scalar soft-threshold", ok)

    # prox optimality probes for the iterative case
    spec = OverlappedNuclear()
    point = DenseTensor(rng.standard_normal((2, 2, 2)))
    prox_out = spec.prox(point, 0.3)
    base = 0.3 * spec.value(prox_out) + 0.5 * frob_norm(DenseTensor(prox_out.array - point.array)) ** 2
    ok = True
    for _ in range(200):
        z = DenseTensor(prox_out.array + 0.05 * rng.standard_normal((2, 2, 2)))
        cand = 0.3 * spec.value(z) + 0.5 * frob_norm(DenseTensor(z.array - point.array)) ** 2
        ok &= cand >= base - 1e-6
    passed &= _check("consensus prox beats random probes", ok)

    # glm derivative identity
    xs = np.linspace(-4, 4, 41)
    ok = True
    for family in (GlmFamily("logistic"), GlmFamily("poisson"), GlmFamily("gaussian")):
        fd = (cumulant(family, xs + 1e-6) - cumulant(family, xs - 1e-6)) / 2e-6
        ok &= np.allclose(fd, mu(family, xs), rtol=1e-5, atol=1e-7)
    passed &= _check("inverse link is the cumulant derivative", ok)

    # penalty schedules evaluate and decrease in T1
    schedule = LambdaSchedule(delta=0.05, noise_scale=0.5)
    ok = True
    for spec2, dims in (
        (OverlappedNuclear(rank=2), (6, 6, 6)),
        (SliceNuclear(rank=2, n_slices=2), (6, 6, 8)),
        (EntryL1(sparsity=3), (6, 6, 6)),
        (FiberGroup(sparsity=3), (6, 6, 6)),
    ):
        lam_small = lambda_for(schedule, spec2, dims, 500)
        lam_big = lambda_for(schedule, spec2, dims, 5000)
        ok &= 0 < lam_big < lam_small
    passed &= _check("penalty schedules finite and decreasing in T1", ok)

    # a tiny end-to-end run is deterministic
    instance = BanditInstance.generate(
        OverlappedNuclear(rank=1), (3, 3, 3), 5, 200, GlmFamily("gaussian", 0.05), Seeds(1, 2, 3)
    )
    rec1 = run_geltc(instance, width_samples=50)
    rec2 = run_geltc(instance, width_samples=50)
    ok = (
        np.array_equal(rec1.cum_regret, rec2.cum_regret)
        and np.array_equal(rec1.chosen_arms, rec2.chosen_arms)
        and bool(np.all(rec1.inst_regret >= 0))
        and bool(np.all(np.diff(rec1.cum_regret) >= 0))
    )
    passed &= _check("tiny bandit run deterministic with monotone regret", ok)

    elapsed = time.perf_counter() - start
    print(f"selftest {'passed' if passed else 'FAILED'} in {elapsed:.1f}s")
    return 0 if passed else 1
