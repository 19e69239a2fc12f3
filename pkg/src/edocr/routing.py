"""Cluster-head overlay, sink-rooted depth field and on-demand route discovery."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .net_model import Network, Position, distance


class RoutingError(RuntimeError):
    pass


class RouteNotFound(RoutingError):
    pass


class SourceDead(RoutingError):
    pass


class StaleRoute(RoutingError):
    pass


@dataclass(frozen=True)
class OverlayGraph:
    vertices: tuple[int, ...]
    adjacency: Mapping[int, tuple[int, ...]]
    sink: int
    epoch: int = 0

    def edges(self) -> set[tuple[int, int]]:
        return {(u, v) for u, nbrs in self.adjacency.items() for v in nbrs if u < v}


@dataclass(frozen=True)
class DepthField:
    depth: Mapping[int, int | None]  # None = no path to the sink
    epoch: int = 0

    def __getitem__(self, node: int) -> int | None:
        return self.depth.get(node)

    def reachable(self, node: int) -> bool:
        return self.depth.get(node) is not None


@dataclass(frozen=True)
class Route:
    source: int
    hops: tuple[int, ...]
    sink: int
    epoch: int = 0

    def links(self) -> list[tuple[int, int]]:
        """(sender, receiver) pairs from the source to the sink."""
        path = list(self.hops) + [self.sink]
        if self.source != self.hops[0]:
            path.insert(0, self.source)
        return list(zip(path, path[1:]))


@dataclass(frozen=True)
class Discovery:
    route: Route
    flooded: tuple[int, ...]  # overlay vertices reached by the request flood


@dataclass(frozen=True)
class Packet:
    id: int
    source: int
    size: int
    tick: int = 0


@dataclass
class DeliveryOutcome:
    delivered: bool
    dropped_at: int | None = None  # index into route.links()
    dropped_node: int | None = None
    charges: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return sum(c[2] for c in self.charges)


def build_overlay(heads: Iterable[int], sink: int, positions: Mapping[int, Position] | object,
                  ch_link_range: float, epoch: int = 0) -> OverlayGraph:
    """Unit-disk graph over the current heads plus the sink."""
    vertices = tuple(sorted(set(heads) | {sink}))
    pos = {v: tuple(positions[v]) for v in vertices}
    adj: dict[int, list[int]] = {v: [] for v in vertices}
    for a_idx, u in enumerate(vertices):
        for v in vertices[a_idx + 1:]:
            if distance(pos[u], pos[v]) <= ch_link_range:
                adj[u].append(v)
                adj[v].append(u)
    return OverlayGraph(vertices, {v: tuple(sorted(n)) for v, n in adj.items()}, sink, epoch)


def compute_depths(overlay: OverlayGraph) -> DepthField:
    depth: dict[int, int | None] = {v: None for v in overlay.vertices}
    depth[overlay.sink] = 0
    queue = deque([overlay.sink])
    while queue:
        u = queue.popleft()
        for v in overlay.adjacency[u]:
            if depth[v] is None:
                depth[v] = depth[u] + 1
                queue.append(v)
    return DepthField(depth, overlay.epoch)


def flood_reach(start: int, overlay: OverlayGraph) -> tuple[int, ...]:
    """Vertices a route request broadcast from ``start`` reaches (start included)."""
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in overlay.adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return tuple(sorted(seen))


def discover_route(source: int, depths: DepthField, overlay: OverlayGraph,
                   head_of: Mapping[int, int | None], network: Network | None = None) -> Discovery:
    """Request/reply discovery from ``source`` to the sink.

    The request floods the overlay component of the source's head; the reply
    retraces a strictly depth-decreasing chain, preferring the lowest id among
    equal-depth next hops.
    """
    if network is not None and not network.nodes[source].alive:
        raise SourceDead(source)
    head = head_of.get(source)
    if head is None or head not in overlay.adjacency:
        raise RouteNotFound(f"source {source} has no cluster head")
    if network is not None and not network.nodes[head].alive:
        raise RouteNotFound(f"head {head} died during this epoch")
    flooded = flood_reach(head, overlay)
    d = depths[head]
    if d is None:
        raise RouteNotFound(f"head {head} cannot reach the sink")
    if d == 0:
        raise RouteNotFound("source head coincides with the sink")
    hops = [head]
    current = head
    while depths[current] > 1:
        want = depths[current] - 1
        current = min(v for v in overlay.adjacency[current] if depths[v] == want)
        hops.append(current)
    return Discovery(Route(source, tuple(hops), overlay.sink, overlay.epoch), flooded)


def forward_packet(route: Route, packet: Packet, network: Network, epoch: int) -> DeliveryOutcome:
    """Send ``packet`` along ``route``, charging every sender and receiver.

    The packet is dropped at the first link whose sender is dead before
    sending or after paying for the transmission, or whose receiver is dead
    before or after paying for the reception. Links past the drop point are
    not touched.
    """
    if route.epoch != epoch:
        raise StaleRoute(f"route epoch {route.epoch} != current {epoch}")
    outcome = DeliveryOutcome(delivered=False)
    nodes = network.nodes
    for idx, (tx, rx) in enumerate(route.links()):
        if not nodes[tx].alive:
            outcome.dropped_at, outcome.dropped_node = idx, tx
            return outcome
        outcome.charges.append((tx, "tx", network.charge_tx(tx, 1, packet.size)))
        if not nodes[tx].alive:
            outcome.dropped_at, outcome.dropped_node = idx, tx
            return outcome
        if not nodes[rx].alive:
            outcome.dropped_at, outcome.dropped_node = idx, rx
            return outcome
        if not nodes[rx].is_sink:
            outcome.charges.append((rx, "rx", network.charge_rx(rx, 1, packet.size)))
            if not nodes[rx].alive:
                outcome.dropped_at, outcome.dropped_node = idx, rx
                return outcome
    outcome.delivered = True
    return outcome
