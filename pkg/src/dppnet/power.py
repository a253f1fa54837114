"""Classical transmit-power allocators. All outputs lie in the per-node budget set."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dppnet.network import (
    DEFAULT_KAPPA_MAX,
    ChannelState,
    NumericError,
    PenaltySpec,
    Topology,
    link_capacity,
    penalty,
    project_power,
    received_power,
)

ALLOCATOR_KINDS = ("uniform", "pressure", "gradient")
LN2 = np.log(2.0)


@dataclass
class AllocatorSpec:
    kind: str = "uniform"
    steps: int = 10
    step_size: float = 0.1  # fraction of P_max moved per gradient step
    V: float = 0.0

    def __post_init__(self):
        if self.kind not in ALLOCATOR_KINDS:
            raise ValueError(f"unknown allocator {self.kind!r}")
        if self.steps < 1 or self.step_size <= 0 or self.V < 0:
            raise ValueError(f"invalid allocator spec {self}")


def uniform_power(topology: Topology, P_max: float) -> np.ndarray:
    deg = topology.adj.sum(axis=1)
    share = np.divide(P_max, deg, out=np.zeros(topology.n), where=deg > 0)
    return topology.adj * share[:, None]


def link_pressure(W: np.ndarray, adj: np.ndarray) -> np.ndarray:
    """Best positive commodity weight on each link, zero elsewhere."""
    if W.shape[2] == 0:
        return np.zeros(adj.shape)
    return np.where(adj, np.maximum(W.max(axis=2), 0.0), 0.0)


def pressure_proportional_power(W: np.ndarray, topology: Topology, P_max: float) -> np.ndarray:
    w = link_pressure(W, topology.adj)
    tot = w.sum(axis=1, keepdims=True)
    return np.divide(P_max * w, tot, out=np.zeros_like(w), where=tot > 0)


def capacity_gradient(P: np.ndarray, link_weights: np.ndarray, ch: ChannelState,
                      topology: Topology) -> np.ndarray:
    """Gradient of sum_ij w_ij * kappa_ij(P) with the interference and kappa_max clamps inactive.

    With R_j the total power heard at j, kappa_ij = log2(R_j + N0) - log2(R_j - h_ij P_ij + N0).
    """
    h = ch.gains
    R = received_power(P, ch) + ch.noise
    D = R[None, :] - h * P
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = link_weights.sum(axis=0) / R
        beta = np.where(topology.adj, link_weights / D, 0.0).sum(axis=0)
        own = np.where(topology.adj, link_weights * h / D, 0.0)
    grad = (h @ (alpha - beta))[:, None] + own
    return np.where(topology.adj, grad / LN2, 0.0)


def surrogate(P, pressure, ch, topology, spec: AllocatorSpec, pen: PenaltySpec,
              kappa_max=DEFAULT_KAPPA_MAX) -> float:
    kappa = link_capacity(P, ch, topology, kappa_max)
    return float(np.sum(pressure * kappa) - spec.V * penalty(P, kappa, pen))


def surrogate_gradient(P, pressure, ch, topology, spec: AllocatorSpec, pen: PenaltySpec,
                       kappa_max=DEFAULT_KAPPA_MAX) -> np.ndarray:
    grad = capacity_gradient(P, pressure, ch, topology)
    if spec.V == 0 or pen.kind == "none":
        return grad
    if pen.kind == "cons":
        return grad - spec.V * topology.adj
    denom = P + pen.static_power
    kappa = link_capacity(P, ch, topology, kappa_max)
    eff = capacity_gradient(P, np.where(topology.adj, 1.0 / denom, 0.0), ch, topology)
    return grad + spec.V * (eff - np.where(topology.adj, kappa / denom ** 2, 0.0))


def gradient_power(W: np.ndarray, topology: Topology, channel: ChannelState, spec: AllocatorSpec,
                   P_init: np.ndarray | None = None, *, P_max: float = 1.0,
                   pen: PenaltySpec | None = None, kappa_max: float = DEFAULT_KAPPA_MAX) -> np.ndarray:
    """Projected gradient ascent on sum (max_c W)+ * kappa(P) - V * penalty(P).

    Steps are normalised by the largest gradient entry so that ``step_size``
    is a fraction of ``P_max``; the best iterate seen is returned.
    """
    pen = pen or PenaltySpec()
    pressure = link_pressure(W, topology.adj)
    P = uniform_power(topology, P_max) if P_init is None else project_power(P_init, P_max, topology.adj)
    args = (pressure, channel, topology, spec, pen, kappa_max)
    best, best_val = P, surrogate(P, *args)
    if not np.isfinite(best_val):
        raise NumericError("non-finite surrogate at initial power")
    for _ in range(spec.steps):
        g = surrogate_gradient(P, *args)
        scale = np.max(np.abs(g), initial=0.0)
        if not np.isfinite(scale):
            raise NumericError("non-finite power gradient")
        if scale == 0:
            break
        P = project_power(P + spec.step_size * P_max * g / scale, P_max, topology.adj)
        val = surrogate(P, *args)
        if not np.isfinite(val):
            raise NumericError("non-finite surrogate")
        if val > best_val:
            best, best_val = P, val
    return best


def allocate_power(spec: AllocatorSpec, W, topology, channel, *, P_max=1.0,
                   pen: PenaltySpec | None = None, kappa_max=DEFAULT_KAPPA_MAX) -> np.ndarray:
    if spec.kind == "uniform":
        return uniform_power(topology, P_max)
    if spec.kind == "pressure":
        return pressure_proportional_power(W, topology, P_max)
    return gradient_power(W, topology, channel, spec, P_max=P_max, pen=pen, kappa_max=kappa_max)
