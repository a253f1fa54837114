"""Backlog functions: back-pressure, shortest-path and queue-weighted shortest-path.

Every backlog is an n x m matrix with zero entries at (commodity node, commodity).
"""
from __future__ import annotations

import numpy as np

from dppnet.network import Topology

BACKLOG_KINDS = ("bp", "sp", "qsp", "qsp_clamped")
BOUND_TOL = 1e-12


def bp_backlog(Q: np.ndarray) -> np.ndarray:
    return np.array(Q, dtype=float, copy=True)


def init_distances(topology: Topology) -> np.ndarray:
    D = np.full((topology.n, topology.m), np.inf)
    D[topology.commodity_mask] = 0.0
    return D


def _neighbor_min(values: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """For every node, the column-wise minimum of ``values`` over its neighbours (inf if none)."""
    masked = np.where(adj[:, :, None], values[None, :, :], np.inf)
    return masked.min(axis=1)


def distance_relax_step(D: np.ndarray, topology: Topology) -> np.ndarray:
    """One synchronous Bellman-Ford relaxation of hop distances to each commodity."""
    return np.minimum(D, 1.0 + _neighbor_min(D, topology.adj))


def converged_distances(topology: Topology) -> np.ndarray:
    D = init_distances(topology)
    for _ in range(topology.n):
        nxt = distance_relax_step(D, topology)
        if np.array_equal(nxt, D):
            break
        D = nxt
    return D


def sp_backlog(Q: np.ndarray, D: np.ndarray, sp_weight: float) -> np.ndarray:
    if sp_weight <= 0:
        raise ValueError("sp_weight must be positive")
    n = Q.shape[0]
    return Q + sp_weight * np.where(np.isfinite(D), D, float(n))


def qsp_cap(Q: np.ndarray) -> float:
    return max(float(np.max(Q, initial=0.0)), 1.0)


def init_qsp_backlog(Q: np.ndarray, topology: Topology) -> np.ndarray:
    """Starting point above every path value, so value iteration descends onto them."""
    U = Q + topology.n * qsp_cap(Q)
    U[topology.commodity_mask] = 0.0
    return U


def qsp_value_iteration_step(U_prev: np.ndarray, Q: np.ndarray, topology: Topology) -> np.ndarray:
    """One min-plus sweep U_ic = Q_ic + min_j U_prev_jc with current queues as the path costs.

    Values are capped at Q + n * max(Q, 1): no simple path to the commodity
    costs more, so the cap only binds for isolated or cut-off nodes.
    """
    cap = Q + topology.n * qsp_cap(Q)
    U = np.minimum(Q + _neighbor_min(U_prev, topology.adj), cap)
    U[topology.commodity_mask] = 0.0
    return U


def clamp_backlog(U: np.ndarray, Q: np.ndarray, B: float, topology: Topology | None = None) -> np.ndarray:
    if B < 0:
        raise ValueError("B must be non-negative")
    out = np.minimum(np.maximum(U, Q - B), Q + B)
    if topology is not None:
        out[topology.commodity_mask] = 0.0
    return out


def verify_backlog_bound(U: np.ndarray, Q: np.ndarray, B: float) -> bool:
    return bool(np.max(np.abs(U - Q), initial=0.0) <= B + BOUND_TOL)


class BacklogState:
    """Carries the per-slot state (distances or previous values) a backlog kind needs."""

    def __init__(self, kind: str, topology: Topology, *, sp_weight: float = 1.0,
                 bound: float = 10.0, warm_start: bool = True):
        if kind not in BACKLOG_KINDS:
            raise ValueError(f"unknown backlog kind {kind!r}")
        self.kind = kind
        self.sp_weight = sp_weight
        self.bound = bound
        self.warm_start = warm_start
        self.U_prev = None
        self.reset(topology)

    def reset(self, topology: Topology) -> None:
        """Called when the link set changes."""
        self.D = converged_distances(topology) if self.warm_start else init_distances(topology)

    def __call__(self, Q: np.ndarray, topology: Topology) -> np.ndarray:
        if self.kind == "bp":
            return bp_backlog(Q)
        if self.kind == "sp":
            self.D = distance_relax_step(self.D, topology)
            return sp_backlog(Q, self.D, self.sp_weight)
        if self.U_prev is None or self.U_prev.shape != Q.shape:
            self.U_prev = init_qsp_backlog(Q, topology)
        U = qsp_value_iteration_step(self.U_prev, Q, topology)
        self.U_prev = U
        if self.kind == "qsp_clamped":
            U = clamp_backlog(U, Q, self.bound, topology)
        return U
