import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edocr import clustering
from edocr.net_model import EnergyModel, Network, NetworkConfig
from edocr.routing import (
    OverlayGraph, Packet, Route, RouteNotFound, SourceDead, StaleRoute,
    build_overlay, compute_depths, discover_route, forward_packet,
)

import oracles
from conftest import random_state, set_residuals


def test_one_head_in_range_of_sink():
    ov = build_overlay([1], 9, {1: (0.0, 0.0), 9: (3.0, 0.0)}, 5.0)
    assert ov.edges() == {(1, 9)}


def test_heads_out_of_range():
    ov = build_overlay([1, 2], 9, {1: (0.0, 0.0), 2: (10.0, 0.0), 9: (20.0, 0.0)}, 5.0)
    assert ov.edges() == set()
    d = compute_depths(ov)
    assert d[1] is None and d[2] is None and d[9] == 0


def test_overlay_matches_all_pairs_scan():
    rng = np.random.default_rng(0)
    for _ in range(10):
        pts = {i: tuple(rng.uniform(0, 1000, 2)) for i in range(25)}
        heads = list(range(24))
        ov = build_overlay(heads, 24, pts, 300.0)
        assert ov.edges() == oracles.unit_disk_edges(pts, 300.0)


def test_sink_alone():
    ov = build_overlay([], 0, {0: (0.0, 0.0)}, 1.0)
    assert dict(compute_depths(ov).depth) == {0: 0}


def test_path_depths():
    pts = {1: (0.0, 0.0), 2: (1.0, 0.0), 9: (2.0, 0.0)}
    d = compute_depths(build_overlay([1, 2], 9, pts, 1.0))
    assert (d[1], d[2], d[9]) == (2, 1, 0)


def _random_overlay(seed, max_heads=30):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, max_heads + 1))
    pts = {i: tuple(rng.uniform(0, 1000, 2)) for i in range(k + 1)}
    radius = float(rng.uniform(100, 500))
    return build_overlay(range(k), k, pts, radius), pts, radius


def test_depths_match_oracle_on_random_overlays():
    for seed in range(30):
        ov, pts, radius = _random_overlay(seed)
        want = oracles.hop_distances(list(pts), oracles.unit_disk_edges(pts, radius), ov.sink)
        assert dict(compute_depths(ov).depth) == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_depth_field_invariant(seed):
    ov, _, _ = _random_overlay(seed)
    d = compute_depths(ov)
    for v in ov.vertices:
        if v != ov.sink and d[v] is not None:
            assert any(d[u] == d[v] - 1 for u in ov.adjacency[v])


def test_one_hop_route():
    ov = build_overlay([4], 9, {4: (0.0, 0.0), 9: (1.0, 0.0)}, 2.0)
    disc = discover_route(0, compute_depths(ov), ov, {0: 4})
    assert disc.route.hops == (4,)
    assert disc.route.links() == [(0, 4), (4, 9)]


def test_equal_depth_tie_breaks_to_lower_id():
    # heads 5 and 3 both reach the sink in one hop; head 7 sees both
    pts = {7: (0.0, 0.0), 5: (1.0, 1.0), 3: (1.0, -1.0), 9: (2.0, 0.0)}
    ov = build_overlay([7, 5, 3], 9, pts, 1.5)
    disc = discover_route(7, compute_depths(ov), ov, {7: 7})
    assert disc.route.hops == (7, 3)
    assert disc.route.links() == [(7, 3), (3, 9)]


def test_unreachable_head_raises():
    ov = build_overlay([1], 9, {1: (0.0, 0.0), 9: (50.0, 0.0)}, 2.0)
    with pytest.raises(RouteNotFound):
        discover_route(0, compute_depths(ov), ov, {0: 1})
    with pytest.raises(RouteNotFound):
        discover_route(0, compute_depths(ov), ov, {0: None})


def test_dead_source_raises():
    net, _ = random_state(1)
    dead = next(n.id for n in net.sensors if not n.alive)
    ov = build_overlay([0], net.config.sink_id, net.positions, 1e9)
    with pytest.raises(SourceDead):
        discover_route(dead, compute_depths(ov), ov, {dead: 0}, net)


def _elected(seed):
    net, rng = random_state(seed, dead_fraction=0.0)
    clusters = clustering.generate_clusters(net.positions[:-1], net.config, rng)
    clustering.select_heads_edocr(clusters, net, rng)
    heads = [c.head for c in clusters]
    ov = build_overlay(heads, net.config.sink_id, net.positions, net.config.ch_link_range)
    return net, clusters, ov


def test_route_hops_match_bfs_oracle():
    for seed in range(30):
        net, clusters, ov = _elected(seed)
        depths = compute_depths(ov)
        pts = {v: tuple(net.positions[v]) for v in ov.vertices}
        want = oracles.hop_distances(list(pts), oracles.unit_disk_edges(pts, net.config.ch_link_range), ov.sink)
        head_of = {i: c.head for c in clusters for i in c.members}
        for src in range(net.config.node_count):
            if want[head_of[src]] is None:
                with pytest.raises(RouteNotFound):
                    discover_route(src, depths, ov, head_of, net)
                continue
            route = discover_route(src, depths, ov, head_of, net).route
            assert len(route.hops) == want[head_of[src]]
            chain = [depths[h] for h in route.hops] + [0]
            assert all(a - b == 1 for a, b in zip(chain, chain[1:]))
            for u, v in zip(route.hops, route.hops[1:] + (ov.sink,)):
                assert v in ov.adjacency[u]


def _chain_net(residuals, initial=10.0):
    cfg = NetworkConfig(field_width=10, field_height=10, node_count=len(residuals), cluster_count=1,
                        sink_position=(9.0, 0.0), initial_energy=initial, packet_size=1, link_rate=1.0)
    net = Network(cfg, EnergyModel(), [(float(i), 0.0) for i in range(len(residuals))])
    return net


def test_forward_happy_path():
    net = _chain_net([10, 10, 10])
    route = Route(0, (1, 2), net.config.sink_id, epoch=0)
    out = forward_packet(route, Packet(1, 0, 1), net, epoch=0)
    assert out.delivered
    # three transmissions at 2 J each, two receptions at 2 J each
    assert out.energy == 10.0
    assert [n.residual_energy for n in net.sensors] == [8.0, 6.0, 6.0]


def test_forward_drops_at_zero_energy_hop():
    net = _chain_net([10, 10, 10])
    set_residuals(net, [10.0, 0.0, 10.0])
    route = Route(0, (1, 2), net.config.sink_id, epoch=0)
    out = forward_packet(route, Packet(1, 0, 1), net, epoch=0)
    assert not out.delivered and out.dropped_node == 1 and out.dropped_at == 0
    # hop 2 untouched
    assert net.nodes[2].packets_rx == 0 and net.nodes[2].residual_energy == 10.0


def test_forward_drops_when_charge_kills_relay():
    net = _chain_net([3, 3, 3], initial=3.0)
    route = Route(0, (1, 2), net.config.sink_id, epoch=0)
    out = forward_packet(route, Packet(1, 0, 1), net, epoch=0)
    # node 1 survives the receive (3 -> 1) then dies transmitting
    assert not out.delivered and out.dropped_node == 1 and out.dropped_at == 1
    assert not net.nodes[1].alive and net.nodes[2].packets_rx == 0


def test_stale_route():
    net = _chain_net([10, 10])
    with pytest.raises(StaleRoute):
        forward_packet(Route(0, (1,), net.config.sink_id, epoch=1), Packet(1, 0, 1), net, epoch=2)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=2, max_size=6))
def test_forward_never_creates_energy(levels):
    net = _chain_net(levels, initial=6.0)
    set_residuals(net, [float(x) for x in levels])
    for n in net.sensors:  # align counters with the forced state
        n.packets_tx = int(6 - n.residual_energy)
    before = [n.residual_energy for n in net.sensors]
    alive_before = [n.alive for n in net.sensors]
    hops = tuple(range(1, len(levels)))
    out = forward_packet(Route(0, hops, net.config.sink_id), Packet(1, 0, 1), net, epoch=0)
    after = [n.residual_energy for n in net.sensors]
    assert all(a <= b for a, b in zip(after, before))
    assert sum(before) - sum(after) == pytest.approx(out.energy)
    assert all(not n.alive for n, was in zip(net.sensors, alive_before) if not was)
