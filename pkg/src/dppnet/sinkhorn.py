"""Slack-augmented transport problems and a sparse log-domain Sinkhorn solver.

A per-node scheduling problem has one row per out-link (target mass = link
capacity) and one column per commodity (source mass = queued data). Whichever
side has less total mass gets a zero-weight slack row or column so that the two
marginals balance. Cells are held in coordinate form, so many per-node problems
can be stacked into one block-diagonal problem and scaled together.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

BALANCE_TOL = 1e-9


class SinkhornWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class SinkhornProblem:
    weights: np.ndarray        # raw weight per cell (0 on slack cells)
    rows: np.ndarray           # row id per cell
    cols: np.ndarray           # column id per cell
    row_marginal: np.ndarray   # link capacities (+ slack row)
    col_marginal: np.ndarray   # queues (+ slack column)
    eta: float
    cell_link: np.ndarray      # local out-link index, -1 for slack cells
    cell_commodity: np.ndarray  # commodity index, -1 for slack cells

    @property
    def n_cells(self) -> int:
        return len(self.weights)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_marginal), len(self.col_marginal)

    @property
    def log_kernel(self) -> np.ndarray:
        """eta * W+ per cell: non-positive weights score the same as slack."""
        return self.eta * np.maximum(self.weights, 0.0)

    def dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill)
        out[self.rows, self.cols] = self.weights
        return out


@dataclass
class SinkhornConfig:
    eta: float = 1.0
    max_iters: int = 500
    tol: float = 1e-6

    def __post_init__(self):
        if self.eta <= 0 or self.tol <= 0 or self.max_iters < 1:
            raise ValueError(f"invalid Sinkhorn configuration {self}")


@dataclass
class SinkhornResult:
    plan: np.ndarray
    iterations: int
    violation: float
    converged: bool
    history: np.ndarray


def build_ot_problem(W_i: np.ndarray, Q_i: np.ndarray, kappa_i: np.ndarray,
                     eta: float) -> SinkhornProblem | None:
    """Slack-augmented transport problem for one node.

    ``W_i`` is (links, commodities). Returns None when the node has no
    capacity or nothing queued. Rows or columns with zero mass carry no cells.
    """
    W_i = np.asarray(W_i, dtype=float)
    Q_i = np.asarray(Q_i, dtype=float)
    kappa_i = np.asarray(kappa_i, dtype=float)
    if np.any(Q_i < 0) or np.any(kappa_i < 0):
        raise ValueError("negative marginal")
    k, m = W_i.shape
    s, q = kappa_i.sum(), Q_i.sum()
    if s <= 0 or q <= 0:
        return None
    d = s - q
    row_marginal, col_marginal = kappa_i, Q_i
    if d > 0:
        col_marginal = np.append(Q_i, d)
    elif d < 0:
        row_marginal = np.append(kappa_i, -d)

    links, comms = np.meshgrid(np.arange(len(row_marginal)), np.arange(len(col_marginal)),
                               indexing="ij")
    links, comms = links.ravel(), comms.ravel()
    keep = (row_marginal[links] > 0) & (col_marginal[comms] > 0)
    links, comms = links[keep], comms[keep]
    real = (links < k) & (comms < m)
    weights = np.zeros(len(links))
    weights[real] = W_i[links[real], comms[real]]
    return SinkhornProblem(
        weights=weights, rows=links, cols=comms,
        row_marginal=row_marginal, col_marginal=col_marginal, eta=float(eta),
        cell_link=np.where(real, links, -1), cell_commodity=np.where(real, comms, -1),
    )


def block_diag_batch(problems: list[SinkhornProblem]) -> tuple[SinkhornProblem, np.ndarray]:
    """Stack problems block-diagonally; also returns cell offsets (len(problems) + 1)."""
    if not problems:
        raise ValueError("empty batch")
    etas = {p.eta for p in problems}
    if len(etas) > 1:
        raise ValueError(f"mixed regularisation in batch: {sorted(etas)}")
    row_off = np.cumsum([0] + [p.shape[0] for p in problems])
    col_off = np.cumsum([0] + [p.shape[1] for p in problems])
    cell_off = np.cumsum([0] + [p.n_cells for p in problems])
    cat = np.concatenate
    batch = SinkhornProblem(
        weights=cat([p.weights for p in problems]),
        rows=cat([p.rows + r for p, r in zip(problems, row_off)]),
        cols=cat([p.cols + c for p, c in zip(problems, col_off)]),
        row_marginal=cat([p.row_marginal for p in problems]),
        col_marginal=cat([p.col_marginal for p in problems]),
        eta=problems[0].eta,
        cell_link=cat([p.cell_link for p in problems]),
        cell_commodity=cat([p.cell_commodity for p in problems]),
    )
    return batch, cell_off


def split_plan(plan: np.ndarray, offsets: np.ndarray) -> list[np.ndarray]:
    return [plan[a:b] for a, b in zip(offsets[:-1], offsets[1:])]


class _Segments:
    """Precomputed grouping of cells by segment id, for segmented log-sum-exp."""

    def __init__(self, ids: np.ndarray, n: int):
        self.n = n
        self.order = np.argsort(ids, kind="stable")
        sorted_ids = ids[self.order]
        self.present = np.unique(sorted_ids)
        self.starts = np.searchsorted(sorted_ids, self.present)
        self.ids = ids

    def logsumexp(self, v: np.ndarray) -> np.ndarray:
        out = np.full(self.n, -np.inf)
        if len(v) == 0:
            return out
        vs = v[self.order]
        mx = np.maximum.reduceat(vs, self.starts)
        peak = np.full(self.n, -np.inf)
        peak[self.present] = mx
        total = np.add.reduceat(np.exp(vs - peak[self.ids][self.order]), self.starts)
        out[self.present] = mx + np.log(total)
        return out


def sparse_sinkhorn(problem: SinkhornProblem, cfg: SinkhornConfig | None = None,
                    *, max_iters: int | None = None, tol: float | None = None,
                    force_iters: bool = False) -> SinkhornResult:
    """Alternating column/row scaling of exp(eta * W+) in the log domain.

    Each iteration first matches column sums (sources) and then row sums
    (targets); the reported violation is the L1 column-marginal error left
    after the row update. With ``force_iters`` exactly ``max_iters``
    iterations are run regardless of convergence.
    """
    cfg = cfg or SinkhornConfig(eta=problem.eta)
    max_iters = cfg.max_iters if max_iters is None else max_iters
    tol = cfg.tol if tol is None else tol
    if problem.n_cells == 0:
        return SinkhornResult(np.zeros(0), 0, 0.0, True, np.zeros(0))
    total_r, total_c = problem.row_marginal.sum(), problem.col_marginal.sum()
    if abs(total_r - total_c) > BALANCE_TOL * max(1.0, total_r):
        raise ValueError(f"unbalanced marginals: {total_r} vs {total_c}")

    rows = _Segments(problem.rows, len(problem.row_marginal))
    cols = _Segments(problem.cols, len(problem.col_marginal))
    with np.errstate(divide="ignore"):
        log_r = np.log(problem.row_marginal)
        log_c = np.log(problem.col_marginal)
    lv = problem.log_kernel.copy()
    history = []
    violation = np.inf
    it = 0
    while it < max_iters:
        # empty segments give -inf - -inf; those entries are never gathered
        with np.errstate(invalid="ignore"):
            lv += (log_c - cols.logsumexp(lv))[problem.cols]
            lv += (log_r - rows.logsumexp(lv))[problem.rows]
        it += 1
        col_sums = np.exp(cols.logsumexp(lv))
        violation = float(np.abs(col_sums - problem.col_marginal).sum())
        history.append(violation)
        if violation <= tol and not force_iters:
            break
    converged = violation <= tol
    if not converged and not force_iters:
        warnings.warn(f"Sinkhorn stopped after {it} iterations with marginal error "
                      f"{violation:.3e}", SinkhornWarning, stacklevel=2)
    return SinkhornResult(np.exp(lv), it, violation, converged, np.asarray(history))


def threshold_schedule(plan: np.ndarray, problem: SinkhornProblem, W_i: np.ndarray) -> np.ndarray:
    """Drop slack mass and every cell whose weight is not strictly positive."""
    mu = np.zeros(W_i.shape)
    real = problem.cell_link >= 0
    mu[problem.cell_link[real], problem.cell_commodity[real]] = plan[real]
    return np.where(W_i > 0, mu, 0.0)
