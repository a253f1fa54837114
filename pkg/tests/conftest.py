import sys
from collections import deque

import numpy as np
import pytest

from dppnet.network import Topology


def bfs_hops(adj: np.ndarray, target: int) -> np.ndarray:
    """Hop distance from every node to ``target`` (inf if unreachable)."""
    n = adj.shape[0]
    dist = np.full(n, np.inf)
    dist[target] = 0
    todo = deque([target])
    while todo:
        u = todo.popleft()
        for v in np.flatnonzero(adj[:, u]):
            if dist[v] == np.inf:
                dist[v] = dist[u] + 1
                todo.append(v)
    return dist


def random_graph(rng: np.random.Generator, n: int, p: float, m: int = 2) -> Topology:
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = upper | upper.T
    comms = rng.choice(n, size=m, replace=False)
    return Topology(rng.random((n, 2)), adj, comms, float("nan"))


@pytest.fixture
def path3():
    """Path 0 - 1 - 2 with node 2 the only commodity."""
    return Topology.from_edges(3, [(0, 1), (1, 2)], [2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = sorted(getattr(module, "RESULTS", []), key=lambda l: int(l.split()[1]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
