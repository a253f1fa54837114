"""Random geometric networks, channel gains, SINR capacities and penalties."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

DEFAULT_RADIUS = 0.3
DEFAULT_NOISE = 0.01
DEFAULT_P_MAX = 1.0
DEFAULT_P0 = 0.1
DEFAULT_KAPPA_MAX = 20.0

PENALTY_KINDS = ("none", "cons", "eff")


class ConfigurationError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def _adjacency(positions: np.ndarray, radius: float) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    return (dist > 0) & (dist <= radius)


@dataclass(frozen=True, eq=False)
class Topology:
    """Node positions, symmetric boolean adjacency and the commodity nodes.

    ``adj[i, j]`` is True iff (i, j) is a link. Commodity ``k`` is the
    destination node ``commodities[k]``; queue and backlog matrices are
    indexed ``[node, k]``.
    """

    positions: np.ndarray
    adj: np.ndarray
    commodities: np.ndarray
    radius: float = DEFAULT_RADIUS

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def m(self) -> int:
        return len(self.commodities)

    @property
    def links(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.adj)]

    @property
    def neighbors(self) -> list[np.ndarray]:
        return [np.flatnonzero(row) for row in self.adj]

    @property
    def commodity_mask(self) -> np.ndarray:
        """n x m mask, True at (commodities[k], k)."""
        mask = np.zeros((self.n, self.m), dtype=bool)
        mask[self.commodities, np.arange(self.m)] = True
        return mask

    @classmethod
    def from_positions(cls, positions, commodities, radius=DEFAULT_RADIUS) -> "Topology":
        positions = np.asarray(positions, dtype=float)
        return cls(positions, _adjacency(positions, radius),
                   np.asarray(commodities, dtype=int), float(radius))

    @classmethod
    def from_edges(cls, n, edges, commodities, positions=None) -> "Topology":
        """Build from an explicit undirected edge list (used for hand-made fixtures)."""
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            adj[i, j] = adj[j, i] = True
        if positions is None:
            positions = np.zeros((n, 2))
        return cls(np.asarray(positions, dtype=float), adj,
                   np.asarray(commodities, dtype=int), float("nan"))


@dataclass(frozen=True, eq=False)
class ChannelState:
    gains: np.ndarray  # n x n, zero off-links
    noise: float = DEFAULT_NOISE


@dataclass(frozen=True)
class PenaltySpec:
    kind: str = "none"
    static_power: float = DEFAULT_P0

    def __post_init__(self):
        if self.kind not in PENALTY_KINDS:
            raise ConfigurationError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "eff" and self.static_power <= 0:
            raise ConfigurationError("energy-efficiency penalty needs static_power > 0")

    def lower_bound(self, n_links: int, kappa_max: float = DEFAULT_KAPPA_MAX) -> float:
        if self.kind == "eff":
            return -n_links * kappa_max / self.static_power
        return 0.0


def sample_commodities(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    while True:
        chosen = np.flatnonzero(rng.random(n) < fraction)
        if 1 <= len(chosen) < n:
            return chosen


def generate_geometric_network(n_min: int, n_max: int, commodity_fraction: float,
                               d: float, rng: np.random.Generator) -> Topology:
    if not 0 < commodity_fraction < 1:
        raise ConfigurationError(f"commodity_fraction must be in (0, 1), got {commodity_fraction}")
    if d <= 0:
        raise ConfigurationError(f"connection threshold must be positive, got {d}")
    if n_min < 2 or n_max < n_min:
        raise ConfigurationError(f"bad node range [{n_min}, {n_max}]")
    n = int(rng.integers(n_min, n_max + 1))
    positions = rng.random((n, 2))
    commodities = sample_commodities(n, commodity_fraction, rng)
    return Topology.from_positions(positions, commodities, d)


def channel_gains(topology: Topology, noise: float = DEFAULT_NOISE) -> ChannelState:
    diff = topology.positions[:, None, :] - topology.positions[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    gains = np.where(topology.adj, (1.0 + dist) ** -3, 0.0)
    return ChannelState(gains, float(noise))


def received_power(P: np.ndarray, ch: ChannelState) -> np.ndarray:
    """Total power heard at each receiver j from all of its neighbours."""
    return ch.gains.T @ P.sum(axis=1)


def link_capacity(P: np.ndarray, ch: ChannelState, topology: Topology,
                  kappa_max: float = DEFAULT_KAPPA_MAX) -> np.ndarray:
    """Shannon capacity log2(1 + SINR) of every link, capped at ``kappa_max``.

    Interference at receiver j is everything j hears from its neighbours
    minus the intended signal; it is clamped at zero before the noise is added.
    """
    P = np.asarray(P, dtype=float)
    if not np.all(np.isfinite(P)):
        raise NumericError("non-finite transmit power")
    signal = ch.gains * P
    interference = np.maximum(received_power(P, ch)[None, :] - signal, 0.0)
    kappa = np.log2(1.0 + signal / (interference + ch.noise))
    return np.where(topology.adj, np.minimum(kappa, kappa_max), 0.0)


def penalty(P: np.ndarray, kappa: np.ndarray, spec: PenaltySpec) -> float:
    if spec.kind == "none":
        return 0.0
    if spec.kind == "cons":
        return float(np.sum(P))
    return float(-np.sum(kappa / (P + spec.static_power)))


def project_power(P_raw: np.ndarray, P_max: float, adj: np.ndarray | None = None) -> np.ndarray:
    """Map onto {P >= 0, row sums <= P_max} by clipping and row-wise rescaling."""
    P = np.maximum(np.asarray(P_raw, dtype=float), 0.0)
    if adj is not None:
        P = np.where(adj, P, 0.0)
    rows = P.sum(axis=1)
    over = rows > P_max
    scale = np.ones_like(rows)
    scale[over] = P_max / rows[over]
    return P * scale[:, None]


def perturb_positions(topology: Topology, sigma: float, rng: np.random.Generator) -> Topology:
    """Gaussian jitter of node positions, clamped to the unit square; links rebuilt."""
    if sigma < 0:
        raise ConfigurationError("sigma must be non-negative")
    if sigma == 0:
        return topology
    noise = rng.normal(0.0, sigma, size=topology.positions.shape)
    positions = np.minimum(np.maximum(topology.positions + noise, 0.0), 1.0)
    return replace(topology, positions=positions, adj=_adjacency(positions, topology.radius))


def network_to_json(topology: Topology, channel: ChannelState | None = None) -> str:
    doc = {
        "n": topology.n,
        "radius": topology.radius,
        "positions": topology.positions.tolist(),
        "links": topology.links,
        "commodities": topology.commodities.tolist(),
    }
    if channel is not None:
        doc["noise"] = channel.noise
        doc["gains"] = [float(channel.gains[i, j]) for i, j in topology.links]
    return json.dumps(doc)


def network_from_json(text: str) -> tuple[Topology, ChannelState | None]:
    doc = json.loads(text)
    n = doc["n"]
    adj = np.zeros((n, n), dtype=bool)
    for i, j in doc["links"]:
        adj[i, j] = True
    radius = doc["radius"] if doc["radius"] is not None else float("nan")
    topology = Topology(np.asarray(doc["positions"], dtype=float).reshape(n, 2), adj,
                        np.asarray(doc["commodities"], dtype=int), float(radius))
    channel = None
    if "gains" in doc:
        gains = np.zeros((n, n))
        for (i, j), g in zip(doc["links"], doc["gains"]):
            gains[i, j] = g
        channel = ChannelState(gains, doc["noise"])
    return topology, channel
