"""Randomised oracle suites behind ``dppnet verify``."""
from __future__ import annotations

import numpy as np

from dppnet.oracle import (
    dense_entropic_reference,
    random_schedule_lp,
    solve_schedule_lp,
    verify_lemma2,
    verify_theorem2,
)
from dppnet.sinkhorn import block_diag_batch, build_ot_problem, sparse_sinkhorn


def threshold_suite(n: int, rng: np.random.Generator) -> int:
    return sum(verify_theorem2(random_schedule_lp(rng)) for _ in range(n))


def structure_suite(n: int, rng: np.random.Generator) -> int:
    ok = 0
    for _ in range(n):
        lp = random_schedule_lp(rng)
        ok += verify_lemma2(solve_schedule_lp(lp)[0], lp)
    return ok


def sparse_dense_suite(n: int, rng: np.random.Generator, iters: int = 50) -> float:
    """Worst entrywise gap between the sparse and dense solvers over ``n`` batched problems."""
    worst = 0.0
    for _ in range(n):
        problems = []
        while len(problems) < int(rng.integers(1, 5)):
            lp = random_schedule_lp(rng)
            p = build_ot_problem(lp.weights, lp.queues, lp.capacities, eta=1.0)
            if p is not None:
                problems.append(p)
        batch, _ = block_diag_batch(problems)
        got = sparse_sinkhorn(batch, max_iters=iters, force_iters=True).plan
        ref = dense_entropic_reference(batch, iters=iters)
        worst = max(worst, float(np.max(np.abs(got - ref))))
    return worst


def run_oracle_suites(n_instances: int = 1000, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    eq = threshold_suite(n_instances, rng)
    st = structure_suite(n_instances, rng)
    gap = sparse_dense_suite(max(1, n_instances // 20), rng)
    results = [
        ("thresholded transport solves the schedule LP", eq == n_instances, f"{eq}/{n_instances}"),
        ("optimal schedules saturate a bound", st == n_instances, f"{st}/{n_instances}"),
        ("sparse vs dense sinkhorn", gap <= 1e-8, f"max gap {gap:.2e}"),
    ]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return all(ok for _, ok, _ in results)
