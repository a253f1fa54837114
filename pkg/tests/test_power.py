import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dppnet.network import (
    NumericError,
    PenaltySpec,
    Topology,
    channel_gains,
    generate_geometric_network,
    link_capacity,
)
from dppnet.power import (
    AllocatorSpec,
    allocate_power,
    capacity_gradient,
    gradient_power,
    pressure_proportional_power,
    surrogate,
    surrogate_gradient,
    uniform_power,
)


def test_uniform_examples():
    top = Topology.from_edges(4, [(0, 1), (0, 2)], [1])
    P = uniform_power(top, 1.0)
    assert P[0, 1] == P[0, 2] == 0.5
    assert not P[3].any()
    assert P[1, 0] == 1.0


def test_pressure_examples():
    top = Topology.from_edges(3, [(0, 1), (0, 2)], [1])
    W = np.zeros((3, 3, 1))
    W[0, 1, 0] = 1.0
    assert pressure_proportional_power(W, top, 2.0)[0].tolist() == [0, 2.0, 0]
    W[0, 2, 0] = 3.0
    assert pressure_proportional_power(W, top, 1.0)[0].tolist() == [0, 0.25, 0.75]
    assert not pressure_proportional_power(-W, top, 1.0).any()


def random_case(seed):
    rng = np.random.default_rng(seed)
    top = generate_geometric_network(6, 12, 0.3, 0.45, rng)
    P = uniform_power(top, 1.0) * rng.uniform(0.2, 1.0, (top.n, 1))
    weights = np.where(top.adj, rng.random((top.n, top.n)), 0.0)
    return top, channel_gains(top), P, weights


@pytest.mark.parametrize("seed", range(10))
def test_capacity_gradient_matches_finite_differences(seed):
    top, ch, P, w = random_case(seed)
    grad = capacity_gradient(P, w, ch, top)
    f = lambda X: np.sum(w * link_capacity(X, ch, top, kappa_max=np.inf))
    h = 1e-6
    for a, b in top.links[:15]:
        E = np.zeros_like(P)
        E[a, b] = h
        fd = (f(P + E) - f(P - E)) / (2 * h)
        assert grad[a, b] == pytest.approx(fd, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize("kind", ["cons", "eff"])
def test_surrogate_gradient_matches_finite_differences(kind):
    top, ch, P, w = random_case(11)
    spec, pen = AllocatorSpec("gradient", V=0.7), PenaltySpec(kind, 0.1)
    g = surrogate_gradient(P, w, ch, top, spec, pen, kappa_max=np.inf)
    f = lambda X: surrogate(X, w, ch, top, spec, pen, kappa_max=np.inf)
    h = 1e-6
    for a, b in top.links[:10]:
        E = np.zeros_like(P)
        E[a, b] = h
        assert g[a, b] == pytest.approx((f(P + E) - f(P - E)) / (2 * h), rel=1e-4, abs=1e-6)


def test_large_v_cons_turns_power_off():
    top, ch, _, _ = random_case(3)
    W = np.where(top.adj[:, :, None], 1.0, 0.0)
    spec = AllocatorSpec("gradient", steps=50, step_size=0.1, V=1e6)
    P = gradient_power(W, top, ch, spec, pen=PenaltySpec("cons"))
    assert P.sum() < 1e-9


def test_isolated_link_goes_to_full_power():
    top = Topology.from_positions([[0.2, 0.2], [0.4, 0.2]], [1], radius=0.3)
    W = np.zeros((2, 2, 1))
    W[0, 1, 0] = 1.0
    P = gradient_power(W, top, channel_gains(top), AllocatorSpec("gradient", steps=20),
                       P_init=np.array([[0, 0.1], [0.1, 0]]))
    assert P[0, 1] == pytest.approx(1.0)


def test_gradient_never_worse_than_start():
    for seed in range(10):
        top, ch, _, _ = random_case(seed)
        W = np.random.default_rng(seed).normal(size=(top.n, top.n, top.m))
        spec, pen = AllocatorSpec("gradient", V=0.0), PenaltySpec()
        P = gradient_power(W, top, ch, spec)
        pressure = np.where(top.adj, np.maximum(W.max(2), 0), 0)
        assert surrogate(P, pressure, ch, top, spec, pen) >= \
            surrogate(uniform_power(top, 1.0), pressure, ch, top, spec, pen) - 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["uniform", "pressure", "gradient"]))
def test_allocations_within_budget(seed, kind):
    top, ch, _, _ = random_case(seed)
    W = np.random.default_rng(seed).normal(size=(top.n, top.n, top.m))
    P = allocate_power(AllocatorSpec(kind), W, top, ch, P_max=0.7)
    assert np.all(P >= 0)
    assert np.all(P.sum(1) <= 0.7 + 1e-12)
    assert not P[~top.adj].any()


def test_gradient_deterministic():
    top, ch, _, _ = random_case(4)
    W = np.ones((top.n, top.n, top.m))
    spec = AllocatorSpec("gradient")
    assert np.array_equal(gradient_power(W, top, ch, spec), gradient_power(W, top, ch, spec))


def test_nonfinite_surrogate_aborts():
    top, ch, _, _ = random_case(5)
    W = np.full((top.n, top.n, top.m), np.nan)
    with pytest.raises(NumericError):
        gradient_power(W, top, ch, AllocatorSpec("gradient"))


def test_bad_spec():
    with pytest.raises(ValueError):
        AllocatorSpec("magic")
    with pytest.raises(ValueError):
        AllocatorSpec(step_size=0)
