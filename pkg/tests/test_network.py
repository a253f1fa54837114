import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dppnet.network import (
    ChannelState,
    ConfigurationError,
    NumericError,
    PenaltySpec,
    Topology,
    channel_gains,
    generate_geometric_network,
    link_capacity,
    network_from_json,
    network_to_json,
    penalty,
    perturb_positions,
    project_power,
)
from dppnet.power import uniform_power


def two_nodes(dist=0.2):
    return Topology.from_positions([[0.1, 0.1], [0.1 + dist, 0.1]], [1], radius=0.5)


def test_large_radius_gives_complete_graph():
    rng = np.random.default_rng(0)
    top = generate_geometric_network(5, 5, 0.2, 1.5, rng)
    assert top.n == 5
    assert top.adj.sum() == 20
    assert not top.adj.diagonal().any()


def test_tiny_radius_gives_no_links():
    top = generate_geometric_network(10, 10, 0.2, 1e-12, np.random.default_rng(1))
    assert top.adj.sum() == 0


def test_generator_invariants():
    rng = np.random.default_rng(2)
    for _ in range(50):
        top = generate_geometric_network(20, 50, 0.2, 0.3, rng)
        assert 20 <= top.n <= 50
        assert np.array_equal(top.adj, top.adj.T)
        assert 1 <= top.m < top.n
        assert np.all((top.positions >= 0) & (top.positions <= 1))


def test_mean_degree_matches_monte_carlo_link_probability():
    # oracle: probability that two uniform points are within 0.3, by direct sampling
    oracle_rng = np.random.default_rng(99)
    x, y = oracle_rng.random((2, 2_000_000, 2))
    p_link = np.mean(np.linalg.norm(x - y, axis=1) <= 0.3)
    expected = 29 * p_link

    rng = np.random.default_rng(7)
    degs = [generate_geometric_network(30, 30, 0.2, 0.3, rng).adj.sum(1).mean() for _ in range(1000)]
    assert np.mean(degs) == pytest.approx(expected, rel=0.02)


@pytest.mark.parametrize("kwargs", [dict(commodity_fraction=0.0), dict(commodity_fraction=1.0),
                                    dict(d=0.0), dict(d=-1.0)])
def test_generator_rejects_bad_config(kwargs):
    args = dict(n_min=5, n_max=5, commodity_fraction=0.2, d=0.3, rng=np.random.default_rng(0))
    args.update(kwargs)
    with pytest.raises(ConfigurationError):
        generate_geometric_network(**args)


def test_commodity_fraction_on_average():
    rng = np.random.default_rng(3)
    frac = np.mean([generate_geometric_network(40, 40, 0.2, 0.3, rng).m / 40 for _ in range(400)])
    assert frac == pytest.approx(0.2, abs=0.01)


def test_channel_gain_values():
    top = Topology.from_positions([[0, 0], [1, 0], [0.5, 0]], [0], radius=1.0)
    ch = channel_gains(top)
    assert ch.gains[0, 1] == pytest.approx(0.125)
    assert ch.gains[0, 2] == pytest.approx(1.5 ** -3)
    assert np.array_equal(ch.gains, ch.gains.T)
    assert ch.gains[0, 0] == 0
    # colocated nodes are not linked, but the gain law gives 1 at distance 0
    assert (1.0 + 0.0) ** -3 == 1.0


def test_gain_decreases_along_chain():
    top = Topology.from_positions([[0, 0], [0.1, 0], [0.25, 0], [0.45, 0]], [3], radius=1.0)
    g = channel_gains(top).gains[0, 1:]
    assert np.all(np.diff(g) < 0)


def test_zero_power_zero_capacity():
    top = generate_geometric_network(10, 10, 0.2, 0.5, np.random.default_rng(0))
    assert np.all(link_capacity(np.zeros((10, 10)), channel_gains(top), top) == 0)


def test_isolated_link_at_unit_snr():
    top = two_nodes(0.2)
    ch = channel_gains(top, noise=0.01)
    P = np.zeros((2, 2))
    P[0, 1] = 0.01 / ch.gains[0, 1]
    assert link_capacity(P, ch, top)[0, 1] == pytest.approx(1.0)


def test_second_transmitter_reduces_capacity():
    # receiver 1 in the middle, transmitter 0 on the left, interferer 2 on the right
    top = Topology.from_positions([[0.0, 0.0], [0.2, 0.0], [0.35, 0.0]], [1], radius=0.5)
    ch = channel_gains(top, noise=0.01)
    P = np.zeros((3, 3))
    P[0, 1] = 1.0
    alone = link_capacity(P, ch, top)[0, 1]
    P[2, 0] = 0.5
    with_interferer = link_capacity(P, ch, top)[0, 1]
    h01, h21 = 1.2 ** -3, 1.15 ** -3
    assert alone == pytest.approx(np.log2(1 + h01 / 0.01))
    assert with_interferer == pytest.approx(np.log2(1 + h01 / (h21 * 0.5 + 0.01)))
    assert with_interferer < alone


def test_capacity_rejects_nan():
    top = two_nodes()
    with pytest.raises(NumericError):
        link_capacity(np.full((2, 2), np.nan), channel_gains(top), top)


def test_capacity_capped():
    top = two_nodes(0.01)
    P = np.array([[0, 1e12], [0, 0]], dtype=float)
    assert link_capacity(P, channel_gains(top), top, kappa_max=20.0)[0, 1] == 20.0


def test_capacity_increasing_in_power_on_isolated_link():
    top = two_nodes(0.3)
    ch = channel_gains(top)
    vals = []
    for p in np.linspace(0.1, 1.0, 5):
        P = np.zeros((2, 2))
        P[0, 1] = p
        vals.append(link_capacity(P, ch, top)[0, 1])
        h = 1e-6
        P2 = P.copy()
        P2[0, 1] += h
        assert (link_capacity(P2, ch, top)[0, 1] - vals[-1]) / h > 0
    assert np.all(np.diff(vals) > 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_capacity_nonnegative_and_zero_off_links(seed):
    rng = np.random.default_rng(seed)
    top = generate_geometric_network(5, 15, 0.3, 0.4, rng)
    P = project_power(rng.random((top.n, top.n)) * 2, 1.0, top.adj)
    kappa = link_capacity(P, channel_gains(top), top)
    assert np.all(kappa >= 0)
    assert np.all(kappa[~top.adj] == 0)


def test_penalties():
    P = np.array([[0, 1.0], [2.0, 0]])
    assert penalty(P, np.ones((2, 2)), PenaltySpec("none")) == 0
    assert penalty(P, np.zeros((2, 2)), PenaltySpec("cons")) == 3.0
    assert penalty(P, np.zeros((2, 2)), PenaltySpec("eff", 0.1)) == 0.0
    kappa = np.array([[0, 2.0], [1.0, 0]])
    assert penalty(P, kappa, PenaltySpec("eff", 1.0)) == pytest.approx(-(2 / 2 + 1 / 3))


def test_eff_penalty_lower_bound():
    top = generate_geometric_network(10, 10, 0.2, 0.5, np.random.default_rng(4))
    spec = PenaltySpec("eff", 0.1)
    P = uniform_power(top, 1.0)
    kappa = link_capacity(P, channel_gains(top), top)
    assert penalty(P, kappa, spec) >= spec.lower_bound(len(top.links))


def test_penalty_config_errors():
    with pytest.raises(ConfigurationError):
        PenaltySpec("eff", 0.0)
    with pytest.raises(ConfigurationError):
        PenaltySpec("bogus")


@given(arrays(float, (4, 4), elements=st.floats(0, 10)))
def test_cons_penalty_zero_iff_zero_power(P):
    val = penalty(P, np.zeros_like(P), PenaltySpec("cons"))
    assert val >= 0
    assert (val == 0) == (not P.any())


def test_project_power_examples():
    assert np.allclose(project_power(np.array([[0, 1.5, 0.5]]), 1.0), [[0, 0.75, 0.25]])
    feasible = np.array([[0, 0.3, 0.2], [0.1, 0, 0]])
    assert np.array_equal(project_power(feasible, 1.0), feasible)
    assert np.array_equal(project_power(np.array([[-1.0, -2.0]]), 1.0), [[0, 0]])


@given(arrays(float, (5, 5), elements=st.floats(-100, 100)), st.floats(0.01, 10))
def test_project_power_feasible(P_raw, P_max):
    P = project_power(P_raw, P_max)
    assert np.all(P >= 0)
    assert np.all(P.sum(axis=1) <= P_max + 1e-12)


class _FixedNormal:
    def __init__(self, value):
        self.value = value

    def normal(self, loc, scale, size):
        return np.full(size, self.value)


def test_perturb_zero_sigma_is_identity():
    top = generate_geometric_network(10, 10, 0.2, 0.3, np.random.default_rng(0))
    assert perturb_positions(top, 0.0, np.random.default_rng(1)) is top


def test_perturb_clamps():
    top = Topology.from_positions([[0.99, 0.5], [0.02, 0.5]], [0], radius=0.3)
    out = perturb_positions(top, 0.1, _FixedNormal(0.05))
    assert out.positions[0, 0] == 1.0
    assert out.positions[1, 0] == pytest.approx(0.07)
    out = perturb_positions(top, 0.1, _FixedNormal(-0.05))
    assert out.positions[1, 0] == 0.0


def test_perturb_stays_in_square_and_rebuilds_links():
    rng = np.random.default_rng(5)
    top = generate_geometric_network(30, 30, 0.2, 0.3, rng)
    for _ in range(50):
        top = perturb_positions(top, 0.2, rng)
        assert np.all((top.positions >= 0) & (top.positions <= 1))
        rebuilt = Topology.from_positions(top.positions, top.commodities, top.radius)
        assert np.array_equal(rebuilt.adj, top.adj)


def test_json_round_trip():
    top = generate_geometric_network(8, 12, 0.3, 0.4, np.random.default_rng(6))
    ch = channel_gains(top, noise=0.02)
    top2, ch2 = network_from_json(network_to_json(top, ch))
    assert np.array_equal(top2.adj, top.adj)
    assert np.array_equal(top2.positions, top.positions)
    assert np.array_equal(top2.commodities, top.commodities)
    assert top2.radius == top.radius
    assert np.array_equal(ch2.gains, ch.gains)
    assert ch2.noise == 0.02
    top3, ch3 = network_from_json(network_to_json(top))
    assert ch3 is None and isinstance(ch2, ChannelState)
