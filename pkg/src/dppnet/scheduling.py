"""Link weights and per-slot schedulers, plus the full drift-plus-penalty step."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from dppnet.backlog import BacklogState
from dppnet.network import (
    DEFAULT_KAPPA_MAX,
    ChannelState,
    PenaltySpec,
    Topology,
    link_capacity,
    penalty,
)
from dppnet.oracle import ScheduleLP, solve_schedule_lp
from dppnet.power import AllocatorSpec, allocate_power
from dppnet.queues import realize_schedule
from dppnet.sinkhorn import (
    SinkhornConfig,
    SinkhornWarning,
    block_diag_batch,
    build_ot_problem,
    sparse_sinkhorn,
    split_plan,
    threshold_schedule,
)

SCHEDULER_KINDS = ("maxweight", "softmax", "sinkhorn", "exact")


def compute_weights(U: np.ndarray, topology: Topology) -> np.ndarray:
    """W[i, j, c] = U[i, c] - U[j, c] on links, zero elsewhere."""
    W = U[:, None, :] - U[None, :, :]
    return np.where(topology.adj[:, :, None], W, 0.0)


def max_weight_schedule(W: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Full link capacity to the best positive commodity (lowest index on ties)."""
    mu = np.zeros_like(W)
    if W.shape[2] == 0:
        return mu
    best = np.argmax(W, axis=2)
    i, j = np.nonzero((np.take_along_axis(W, best[..., None], 2)[..., 0] > 0) & (kappa > 0))
    mu[i, j, best[i, j]] = kappa[i, j]
    return mu


def softmax_max_weight(W: np.ndarray, Q: np.ndarray, kappa: np.ndarray,
                       topology: Topology) -> np.ndarray:
    """Queue-feasible max-weight variant.

    Commodity c's queue at i is split over i's out-links by a softmax of
    W[i, :, c]; a link then carries only its argmax commodity, and only when
    that weight is positive.
    """
    adj = topology.adj
    mu = np.zeros_like(W)
    if W.shape[2] == 0:
        return mu
    logits = np.where(adj[:, :, None], W, -np.inf)
    peak = logits.max(axis=1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    ex = np.exp(logits - peak)
    tot = ex.sum(axis=1, keepdims=True)
    share = np.divide(ex, tot, out=np.zeros_like(ex), where=tot > 0)
    psi = np.minimum(share * Q[:, None, :], kappa[:, :, None])
    best = np.argmax(W, axis=2)
    i, j = np.nonzero(adj & (np.take_along_axis(W, best[..., None], 2)[..., 0] > 0))
    mu[i, j, best[i, j]] = psi[i, j, best[i, j]]
    return mu


def _node_slices(W, Q, kappa, topology):
    """Yield (node, out-neighbours, W_i, Q_i, kappa_i) for nodes with something to schedule."""
    for i, nbrs in enumerate(topology.neighbors):
        if len(nbrs) == 0:
            continue
        k_i = kappa[i, nbrs]
        if k_i.sum() <= 0 or Q[i].sum() <= 0:
            continue
        yield i, nbrs, W[i, nbrs, :], Q[i], k_i


def sinkhorn_schedule(W: np.ndarray, Q: np.ndarray, kappa: np.ndarray, topology: Topology,
                      cfg: SinkhornConfig, *, return_info: bool = False):
    """Entropic transport schedule for all nodes at once via one block-diagonal solve."""
    mu = np.zeros_like(W)
    parts, problems = [], []
    for i, nbrs, W_i, Q_i, k_i in _node_slices(W, Q, kappa, topology):
        prob = build_ot_problem(W_i, Q_i, k_i, cfg.eta)
        if prob is not None:
            parts.append((i, nbrs, W_i))
            problems.append(prob)
    info = None
    if problems:
        batch, offsets = block_diag_batch(problems)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SinkhornWarning)
            info = sparse_sinkhorn(batch, cfg)
        for (i, nbrs, W_i), prob, plan in zip(parts, problems, split_plan(info.plan, offsets)):
            mu_i = threshold_schedule(plan, prob, W_i)
            # an unconverged plan can overshoot the queue marginal slightly
            sent = mu_i.sum(axis=0)
            over = sent > Q[i]
            mu_i[:, over] *= Q[i, over] / sent[over]
            mu[i, nbrs, :] = mu_i
    return (mu, info) if return_info else mu


def exact_schedule(W: np.ndarray, Q: np.ndarray, kappa: np.ndarray, topology: Topology) -> np.ndarray:
    """Per-node exact solution of the capacity- and queue-constrained schedule LP."""
    mu = np.zeros_like(W)
    for i, nbrs, W_i, Q_i, k_i in _node_slices(W, Q, kappa, topology):
        mu[i, nbrs, :], _ = solve_schedule_lp(ScheduleLP(W_i, k_i, Q_i), max_cells=None)
    return mu


@dataclass
class ControlSpec:
    scheduler: str = "sinkhorn"
    allocator: AllocatorSpec = None
    penalty: PenaltySpec = None
    sinkhorn: SinkhornConfig = None
    P_max: float = 1.0
    kappa_max: float = DEFAULT_KAPPA_MAX
    fixed_capacity: float | None = None  # bypasses the SINR model when set

    def __post_init__(self):
        if self.scheduler not in SCHEDULER_KINDS:
            raise ValueError(f"unknown scheduler {self.scheduler!r}")
        self.allocator = self.allocator or AllocatorSpec()
        self.penalty = self.penalty or PenaltySpec()
        self.sinkhorn = self.sinkhorn or SinkhornConfig()


@dataclass
class StepResult:
    P: np.ndarray
    kappa: np.ndarray
    U: np.ndarray
    W: np.ndarray
    mu_requested: np.ndarray
    mu: np.ndarray  # realized
    penalty: float


def schedule(kind: str, W, Q, kappa, topology, cfg: SinkhornConfig) -> np.ndarray:
    if kind == "maxweight":
        return max_weight_schedule(W, kappa)
    if kind == "softmax":
        return softmax_max_weight(W, Q, kappa, topology)
    if kind == "sinkhorn":
        return sinkhorn_schedule(W, Q, kappa, topology, cfg)
    return exact_schedule(W, Q, kappa, topology)


def dpp_step(Q: np.ndarray, topology: Topology, channel: ChannelState,
             backlog: BacklogState, control: ControlSpec) -> StepResult:
    """Backlog -> power -> capacities -> weights -> schedule -> realized transfers."""
    U = backlog(Q, topology)
    W = compute_weights(U, topology)
    P = allocate_power(control.allocator, W, topology, channel, P_max=control.P_max,
                       pen=control.penalty, kappa_max=control.kappa_max)
    if control.fixed_capacity is None:
        kappa = link_capacity(P, channel, topology, control.kappa_max)
    else:
        kappa = np.where(topology.adj, float(control.fixed_capacity), 0.0)
    mu_req = schedule(control.scheduler, W, Q, kappa, topology, control.sinkhorn)
    mu = realize_schedule(Q, mu_req)
    return StepResult(P, kappa, U, W, mu_req, mu, penalty(P, kappa, control.penalty))
