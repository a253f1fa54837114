"""Fluid queue state, Poisson arrivals and per-slot queue dynamics."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from dppnet.network import Topology

NEG_TOL = 1e-9


class FeasibilityError(RuntimeError):
    pass


def sample_arrivals(rate: float, topology: Topology, rng: np.random.Generator) -> np.ndarray:
    """n x m Poisson(rate) arrivals; nothing arrives for a node's own commodity."""
    if rate < 0:
        raise ValueError("arrival rate must be non-negative")
    A = rng.poisson(rate, size=(topology.n, topology.m)).astype(float)
    A[topology.commodity_mask] = 0.0
    return A


def realize_schedule(Q: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Scale each (node, commodity) slice of ``mu`` down to what is queued.

    ``mu`` has shape (n, n, m), ``Q`` (n, m).
    """
    out = mu.sum(axis=1)
    scale = np.ones_like(Q)
    over = out > Q
    scale[over] = Q[over] / out[over]
    return mu * scale[:, None, :]


def step_queues(Q: np.ndarray, mu: np.ndarray, A: np.ndarray,
                topology: Topology) -> tuple[np.ndarray, float]:
    """Apply one slot of transfers and arrivals; returns (next queues, delivered mass).

    Data flowing into its own commodity node leaves the network.
    """
    inflow = mu.sum(axis=0)
    outflow = mu.sum(axis=1)
    mask = topology.commodity_mask
    delivered = float(inflow[mask].sum())
    Q_next = Q + inflow - outflow + A
    Q_next[mask] = 0.0
    low = Q_next.min(initial=0.0)
    if low < -NEG_TOL:
        raise FeasibilityError(f"queue went negative ({low:.3e}); schedule was not realized")
    return np.maximum(Q_next, 0.0), delivered


@dataclass
class EpisodeMetrics:
    """Per-slot totals for one episode; ``total_queue[t]`` is ||Q(t+1)||_1."""

    total_queue: np.ndarray
    arrivals: np.ndarray
    delivered: np.ndarray
    penalty: np.ndarray

    @property
    def t_max(self) -> int:
        return len(self.total_queue)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "total_queue", "arrivals", "delivered", "penalty"])
        for t in range(self.t_max):
            writer.writerow([t, repr(float(self.total_queue[t])), repr(float(self.arrivals[t])),
                             repr(float(self.delivered[t])), repr(float(self.penalty[t]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EpisodeMetrics":
        rows = list(csv.DictReader(io.StringIO(text)))
        col = lambda k: np.array([float(r[k]) for r in rows])
        return cls(col("total_queue"), col("arrivals"), col("delivered"), col("penalty"))


def queue_ratio(metrics: EpisodeMetrics) -> float:
    """Fraction of all arrived data still queued at the horizon (0 if nothing arrived)."""
    arrived = float(np.sum(metrics.arrivals))
    if arrived <= 0:
        return 0.0
    return float(metrics.total_queue[-1]) / arrived


def stability_slope(metrics: EpisodeMetrics, window: int) -> float:
    """Least-squares slope of the total queue over the last ``window`` slots."""
    if window < 2:
        raise ValueError("window must be at least 2")
    if window > metrics.t_max:
        raise ValueError(f"window {window} exceeds horizon {metrics.t_max}")
    y = np.asarray(metrics.total_queue[-window:], dtype=float)
    return float(np.polyfit(np.arange(window, dtype=float), y, 1)[0])
