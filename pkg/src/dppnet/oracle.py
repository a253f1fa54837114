"""Exact small-instance solvers and checkers for the per-node scheduling problem.

Both the capacity/queue-constrained schedule LP and the balanced transport LP
are bipartite flow problems, solved here exactly by successive shortest
augmenting paths on a residual graph.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dppnet.sinkhorn import SinkhornProblem, build_ot_problem, threshold_schedule

ORACLE_MAX_CELLS = 64
CAP_EPS = 1e-12
COST_RTOL = 1e-12
STRUCTURE_TOL = 1e-9
OBJECTIVE_TOL = 1e-6


class OracleScaleError(ValueError):
    pass


@dataclass
class ScheduleLP:
    weights: np.ndarray     # (links, commodities)
    capacities: np.ndarray  # (links,)
    queues: np.ndarray      # (commodities,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.capacities = np.asarray(self.capacities, dtype=float)
        self.queues = np.asarray(self.queues, dtype=float)
        if self.weights.shape != (len(self.capacities), len(self.queues)):
            raise ValueError("shape mismatch")
        if not (np.all(np.isfinite(self.weights)) and np.all(self.capacities >= 0)
                and np.all(self.queues >= 0)):
            raise ValueError("weights must be finite and bounds non-negative")

    def objective(self, mu: np.ndarray) -> float:
        return float(np.sum(self.weights * mu))

    def is_feasible(self, mu: np.ndarray, tol: float = OBJECTIVE_TOL) -> bool:
        return bool(np.all(mu >= -tol)
                    and np.all(mu.sum(axis=1) <= self.capacities + tol)
                    and np.all(mu.sum(axis=0) <= self.queues + tol))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "capacities": self.capacities.tolist(),
                "queues": self.queues.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScheduleLP":
        w = np.asarray(doc["weights"], dtype=float).reshape(len(doc["capacities"]), len(doc["queues"]))
        return cls(w, doc["capacities"], doc["queues"])


class _FlowGraph:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.head: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]

    def add(self, u: int, v: int, cap: float, cost: float) -> int:
        e = len(self.head)
        for a, b, c, w in ((u, v, cap, cost), (v, u, 0.0, -cost)):
            self.adj[a].append(len(self.head))
            self.head.append(b)
            self.cap.append(c)
            self.cost.append(w)
        return e

    def flow(self, e: int) -> float:
        return self.cap[e ^ 1]

    def _shortest_path(self, s: int):
        # rounding can leave near-zero negative cycles among tied cells; ignore gains below eps
        eps = COST_RTOL * max(1.0, max(map(abs, self.cost), default=0.0))
        dist = [np.inf] * self.n
        prev = [-1] * self.n
        dist[s] = 0.0
        for _ in range(self.n):
            changed = False
            for u in range(self.n):
                if dist[u] == np.inf:
                    continue
                for e in self.adj[u]:
                    if self.cap[e] > CAP_EPS and dist[u] + self.cost[e] < dist[self.head[e]] - eps:
                        dist[self.head[e]] = dist[u] + self.cost[e]
                        prev[self.head[e]] = e
                        changed = True
            if not changed:
                break
        return dist, prev

    def min_cost_flow(self, s: int, t: int, *, full: bool) -> float:
        """Augment along cheapest paths; stop at max flow, or (``full=False``) once paths stop paying."""
        total = 0.0
        while True:
            dist, prev = self._shortest_path(s)
            if dist[t] == np.inf or (not full and dist[t] >= 0):
                return total
            path, v = [], t
            while v != s:
                e = prev[v]
                path.append(e)
                v = self.head[e ^ 1]
                if len(path) > self.n:
                    raise ArithmeticError("negative cycle in residual graph")
            push = min(self.cap[e] for e in path)
            for e in path:
                self.cap[e] -= push
                self.cap[e ^ 1] += push
            total += push


def _check_scale(n_cells: int, limit: int | None) -> None:
    if limit is not None and n_cells > limit:
        raise OracleScaleError(f"{n_cells} cells exceeds oracle limit {limit}")


def solve_schedule_lp(lp: ScheduleLP, max_cells: int | None = ORACLE_MAX_CELLS) -> tuple[np.ndarray, float]:
    """Exact maximiser of W . mu with link sums <= capacity and commodity sums <= queue."""
    k, m = lp.weights.shape
    _check_scale(k * m, max_cells)
    g = _FlowGraph(k + m + 2)
    s, t = k + m, k + m + 1
    for j in range(k):
        g.add(s, j, lp.capacities[j], 0.0)
    for c in range(m):
        g.add(k + c, t, lp.queues[c], 0.0)
    cells = {}
    for j in range(k):
        for c in range(m):
            if lp.weights[j, c] > 0:
                cells[j, c] = g.add(j, k + c, np.inf, -lp.weights[j, c])
    g.min_cost_flow(s, t, full=False)
    mu = np.zeros((k, m))
    for (j, c), e in cells.items():
        mu[j, c] = g.flow(e)
    return mu, lp.objective(mu)


def solve_transport_lp(problem: SinkhornProblem,
                       max_cells: int | None = ORACLE_MAX_CELLS) -> tuple[np.ndarray, float]:
    """Exact maximiser of W+ . plan with row and column sums fixed to the marginals.

    Returns plan values aligned with the problem's cells.
    """
    _check_scale(problem.n_cells, max_cells)
    r, c = problem.shape
    total_r, total_c = problem.row_marginal.sum(), problem.col_marginal.sum()
    if abs(total_r - total_c) > 1e-9 * max(1.0, total_r):
        raise ValueError(f"infeasible marginals: {total_r} vs {total_c}")
    g = _FlowGraph(r + c + 2)
    s, t = r + c, r + c + 1
    for j in range(r):
        g.add(s, j, problem.row_marginal[j], 0.0)
    for k in range(c):
        g.add(r + k, t, problem.col_marginal[k], 0.0)
    gain = np.maximum(problem.weights, 0.0)
    edges = [g.add(int(j), r + int(k), np.inf, -w)
             for j, k, w in zip(problem.rows, problem.cols, gain)]
    sent = g.min_cost_flow(s, t, full=True)
    if sent < total_r - 1e-9 * max(1.0, total_r):
        raise ValueError("marginals cannot be matched on the given cells")
    plan = np.array([g.flow(e) for e in edges])
    return plan, float(gain @ plan)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0)
    return np.squeeze(mx, axis) + np.log(np.sum(np.exp(a - mx), axis=axis))


def dense_entropic_reference(problem: SinkhornProblem, eta: float | None = None,
                             iters: int | None = None, tol: float = 1e-12,
                             max_iters: int = 100_000) -> np.ndarray:
    """Dense log-domain Sinkhorn in extended precision, same update order as the sparse solver.

    Runs exactly ``iters`` iterations if given, otherwise until the L1
    column error drops to ``tol``. Returns plan values aligned with the cells.
    """
    eta = problem.eta if eta is None else eta
    ld = np.longdouble
    r, c = problem.shape
    K = np.full((r, c), -np.inf, dtype=ld)
    K[problem.rows, problem.cols] = ld(eta) * np.maximum(problem.weights, 0.0).astype(ld)
    with np.errstate(divide="ignore"):
        log_r = np.log(problem.row_marginal.astype(ld))
        log_c = np.log(problem.col_marginal.astype(ld))
    live_r = np.isfinite(K).any(axis=1)
    live_c = np.isfinite(K).any(axis=0)
    n = 0
    with np.errstate(invalid="ignore"):
        while True:
            if iters is not None and n >= iters:
                break
            K[:, live_c] += (log_c - _logsumexp(K, 0))[live_c][None, :]
            K[live_r, :] += (log_r - _logsumexp(K, 1))[live_r][:, None]
            n += 1
            if iters is None:
                err = np.abs(np.exp(_logsumexp(K, 0))[live_c] - problem.col_marginal[live_c]).sum()
                if err <= tol or n >= max_iters:
                    break
    return np.exp(K[problem.rows, problem.cols]).astype(float)


def verify_lemma2(mu: np.ndarray, lp: ScheduleLP, tol: float = STRUCTURE_TOL) -> bool:
    """Optimal schedules never use negative cells and saturate a bound at every positive cell."""
    if np.any(mu[lp.weights < 0] > tol):
        return False
    row_full = mu.sum(axis=1) >= lp.capacities - tol
    col_full = mu.sum(axis=0) >= lp.queues - tol
    pos = lp.weights > 0
    return bool(np.all(row_full[:, None] | col_full[None, :] | ~pos))


def threshold_gap(lp: ScheduleLP, max_cells: int | None = ORACLE_MAX_CELLS) -> tuple[bool, float, float]:
    """(thresholded transport plan feasible, its objective, schedule LP optimum)."""
    _, best = solve_schedule_lp(lp, max_cells)
    problem = build_ot_problem(lp.weights, lp.queues, lp.capacities, eta=1.0)
    if problem is None:
        return True, 0.0, best
    plan, _ = solve_transport_lp(problem, max_cells=None)
    mu = threshold_schedule(plan, problem, lp.weights)
    return lp.is_feasible(mu), lp.objective(mu), best


def verify_theorem2(lp: ScheduleLP, tol: float = OBJECTIVE_TOL) -> bool:
    feasible, got, best = threshold_gap(lp)
    return feasible and abs(got - best) <= tol


def random_schedule_lp(rng: np.random.Generator, max_links: int = 5, max_commodities: int = 4,
                       weight_range: float = 5.0, bound_range: float = 3.0) -> ScheduleLP:
    k = int(rng.integers(1, max_links + 1))
    m = int(rng.integers(1, max_commodities + 1))
    return ScheduleLP(rng.uniform(-weight_range, weight_range, (k, m)),
                      rng.uniform(0, bound_range, k), rng.uniform(0, bound_range, m))
