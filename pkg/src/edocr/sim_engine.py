"""Tick-driven simulation loop and the delivery / lifetime metrics."""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from . import clustering, routing
from .clustering import Cluster, HeadStrategy
from .net_model import EnergyModel, Network, NetworkConfig
from .routing import Packet, RouteNotFound

log = logging.getLogger(__name__)


class AccountingError(RuntimeError):
    """The packet ledger became inconsistent."""


class EventKind(str, Enum):
    DEPLOY = "Deploy"
    ELECT = "Elect"
    TRAFFIC_GEN = "TrafficGen"
    DISCOVER = "Discover"
    FORWARD = "Forward"
    NODE_DEATH = "NodeDeath"
    PARTITION = "Partition"


@dataclass(frozen=True)
class SimEvent:
    tick: int
    seq: int
    kind: EventKind
    payload: dict[str, Any]


@dataclass(frozen=True)
class TrafficProfile:
    events_per_tick: float = 5.0
    source_selection: str = "uniform"  # or "fixed"
    fixed_sources: tuple[int, ...] = ()
    packet_size: int = 64

    def __post_init__(self):
        from .net_model import ConfigError

        if not self.events_per_tick >= 0:
            raise ConfigError("events_per_tick ≥ 0")
        if self.source_selection not in ("uniform", "fixed"):
            raise ConfigError("source_selection in {uniform, fixed}")
        if self.source_selection == "fixed" and not self.fixed_sources:
            raise ConfigError("fixed source selection needs fixed_sources")
        if not self.packet_size > 0:
            raise ConfigError("packet_size > 0")


@dataclass(frozen=True)
class MetricsFrame:
    tick: int
    alive_fraction: float
    residual_fraction: float
    pdr: float | None
    drop_ratio: float | None
    throughput: float
    partitioned: bool


@dataclass
class Ledger:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    energy_drawn: float = 0.0
    control_energy: float = 0.0
    data_energy: float = 0.0
    discoveries: int = 0

    @property
    def in_flight(self) -> int:
        return self.sent - self.delivered - self.dropped


@dataclass
class RunResult:
    frames: list[MetricsFrame]
    trace: list[SimEvent]
    summary: dict[str, Any]
    ledger: Ledger
    network: Network
    clusters: list[Cluster]


def pdr(received: int, sent: int) -> float | None:
    if received > sent:
        raise AccountingError(f"received {received} > sent {sent}")
    return None if sent == 0 else received / sent


def drop_ratio(dropped: int, sent: int) -> float | None:
    if dropped > sent:
        raise AccountingError(f"dropped {dropped} > sent {sent}")
    return None if sent == 0 else dropped / sent


def throughput(delivered: int, elapsed: float) -> float:
    if not elapsed > 0:
        raise ValueError("elapsed > 0")
    return delivered / elapsed


def lifetime_summary(trace: list[SimEvent], frames: list[MetricsFrame]) -> dict[str, Any]:
    """First death, first partition, and the final alive / residual fractions."""
    first_death = next((e.tick for e in trace if e.kind is EventKind.NODE_DEATH), None)
    first_partition = next(
        (e.tick for e in trace if e.kind is EventKind.PARTITION and e.payload.get("unreachable")), None
    )
    last = frames[-1] if frames else None
    return {
        "first_death_tick": first_death,
        "first_partition_tick": first_partition,
        "partitioned": first_partition is not None,
        "final_alive_fraction": last.alive_fraction if last else 1.0,
        "final_residual_fraction": last.residual_fraction if last else 1.0,
    }


def _reachable_nodes(network: Network, clusters: list[Cluster], overlay: routing.OverlayGraph) -> tuple[set[int], set[int]]:
    """Alive sensors that can / cannot reach the sink through alive heads."""
    nodes = network.nodes
    seen = {overlay.sink}
    queue = deque([overlay.sink])
    while queue:
        u = queue.popleft()
        for v in overlay.adjacency[u]:
            if v not in seen and nodes[v].alive:
                seen.add(v)
                queue.append(v)
    ok, bad = set(), set()
    for c in clusters:
        live = [i for i in c.members if nodes[i].alive]
        target = ok if c.head is not None and c.head in seen else bad
        target.update(live)
    return ok, bad


class Simulation:
    """One deterministic run; drive it with :meth:`run`."""

    def __init__(self, config: NetworkConfig, strategy: HeadStrategy | str = HeadStrategy.EDOCR,
                 traffic: TrafficProfile | None = None, energy: EnergyModel | None = None,
                 reporting_interval: int = 1, record_trace: bool = True, positions=None):
        config.validate()
        if reporting_interval < 1:
            raise ValueError("reporting_interval >= 1")
        self.config = config
        self.strategy = HeadStrategy(strategy)
        self.traffic = traffic or TrafficProfile(packet_size=config.packet_size)
        self.energy = energy or EnergyModel()
        self.reporting_interval = reporting_interval
        self.record_trace = record_trace

        # independent streams keep deployment and traffic paired across strategies
        deploy_ss, traffic_ss, elect_ss = np.random.SeedSequence(config.seed).spawn(3)
        self.deploy_rng = np.random.default_rng(deploy_ss)
        self.traffic_rng = np.random.default_rng(traffic_ss)
        self.elect_rng = np.random.default_rng(elect_ss)

        if positions is None:
            self.network = Network.deploy(config, self.energy, self.deploy_rng)
        else:
            self.network = Network(config, self.energy, positions)
        self.clusters = clustering.generate_clusters(
            self.network.positions[: config.node_count], config, self.deploy_rng
        )
        self.cluster_of = {i: c.id for c in self.clusters for i in c.members}

        self.ledger = Ledger()
        self.trace: list[SimEvent] = []
        self.frames: list[MetricsFrame] = []
        self._seq = 0
        self.epoch = -1
        self.overlay: routing.OverlayGraph | None = None
        self.depths: routing.DepthField | None = None
        self.route_cache: dict[int, routing.Discovery] = {}
        self._fixed_cursor = 0
        self._packet_id = 0
        self._deaths_seen = 0
        self._alive: list[int] | None = None
        self.first_death_tick: int | None = None
        self.partitioned = False
        self.halted_tick: int | None = None

    # -- trace ------------------------------------------------------------

    def emit(self, tick: int, kind: EventKind, **payload) -> None:
        if self.record_trace:
            self.trace.append(SimEvent(tick, self._seq, kind, payload))
        self._seq += 1

    def _log_deaths(self, tick: int) -> None:
        deaths = self.network.deaths
        while self._deaths_seen < len(deaths):
            node = deaths[self._deaths_seen]
            self._deaths_seen += 1
            self.emit(tick, EventKind.NODE_DEATH, node=node)
            if self.first_death_tick is None:
                self.first_death_tick = tick
            self._alive = None

    # -- phases -----------------------------------------------------------

    def elect(self, tick: int) -> None:
        self.epoch += 1
        election = clustering.elect(self.strategy, self.clusters, self.network, self.elect_rng)
        heads = election.heads
        self.overlay = routing.build_overlay(
            heads.values(), self.config.sink_id, self.network.positions,
            self.config.ch_link_range, self.epoch,
        )
        self.depths = routing.compute_depths(self.overlay)
        self.route_cache.clear()
        self.emit(tick, EventKind.ELECT, epoch=self.epoch, strategy=self.strategy.value,
                  local_head=election.local_head,
                  heads=",".join(f"{c}:{h}" for c, h in sorted(heads.items())),
                  skipped=",".join(map(str, election.skipped)))

    def _head_of(self, node: int) -> int | None:
        return self.clusters[self.cluster_of[node]].head

    def _pick_source(self) -> int | None:
        if self._alive is None:
            self._alive = self.network.alive_ids()
        alive = self._alive
        if not alive:
            return None
        if self.traffic.source_selection == "fixed":
            fixed = self.traffic.fixed_sources
            for _ in range(len(fixed)):
                src = fixed[self._fixed_cursor % len(fixed)]
                self._fixed_cursor += 1
                if self.network.nodes[src].alive:
                    return src
            return None
        return alive[int(self.traffic_rng.integers(len(alive)))]

    def _event_count(self) -> int:
        rate = self.traffic.events_per_tick
        base = int(math.floor(rate))
        frac = rate - base
        if frac > 0 and self.traffic_rng.random() < frac:
            base += 1
        return base

    def _discover(self, tick: int, source: int) -> routing.Discovery:
        head = self._head_of(source)
        cached = self.route_cache.get(head) if head is not None else None
        if cached is not None:
            return routing.Discovery(
                routing.Route(source, cached.route.hops, cached.route.sink, cached.route.epoch), ()
            )
        disc = routing.discover_route(source, self.depths, self.overlay, {source: head}, self.network)
        size = self.config.control_packet_size
        net = self.network
        spent = 0.0
        # RREQ: every flooded head hears the request and rebroadcasts it
        for v in disc.flooded:
            spent += net.charge(v, size, tx_packets=1, rx_packets=1)
        # RREP: retraced from the sink back to the source's head, which only receives
        hops = disc.route.hops
        for i in range(len(hops) - 1, -1, -1):
            spent += net.charge(hops[i], size, tx_packets=1 if i > 0 else 0, rx_packets=1)
        self.ledger.energy_drawn += spent
        self.ledger.control_energy += spent
        self.ledger.discoveries += 1
        self.route_cache[head] = disc
        self.emit(tick, EventKind.DISCOVER, source=source, head=head, epoch=self.epoch,
                  rreq=len(disc.flooded), rrep=len(hops),
                  hops="-".join(map(str, hops)), energy=spent)
        return disc

    def _send(self, tick: int, source: int) -> None:
        self._packet_id += 1
        packet = Packet(self._packet_id, source, self.traffic.packet_size, tick)
        self.ledger.sent += 1
        self.emit(tick, EventKind.TRAFFIC_GEN, packet=packet.id, source=source)
        try:
            disc = self._discover(tick, source)
        except RouteNotFound as exc:
            self.ledger.dropped += 1
            self.emit(tick, EventKind.FORWARD, packet=packet.id, result="DROP",
                      reason="no_route", at=source, energy=0.0)
            log.debug("tick %d packet %d: %s", tick, packet.id, exc)
            return
        outcome = routing.forward_packet(disc.route, packet, self.network, self.epoch)
        spent = outcome.energy
        self.ledger.energy_drawn += spent
        self.ledger.data_energy += spent
        if outcome.delivered:
            self.ledger.delivered += 1
            self.emit(tick, EventKind.FORWARD, packet=packet.id, result="FWD",
                      hops=len(disc.route.links()), energy=spent)
        else:
            self.ledger.dropped += 1
            self.emit(tick, EventKind.FORWARD, packet=packet.id, result="DROP",
                      reason="dead_hop", at=outcome.dropped_node, energy=spent)

    def _sample(self, tick: int) -> None:
        n = self.config.node_count
        net = self.network
        led = self.ledger
        self.frames.append(MetricsFrame(
            tick=tick,
            alive_fraction=len(net.alive_ids()) / n,
            residual_fraction=net.total_residual() / net.total_initial(),
            pdr=pdr(led.delivered, led.sent),
            drop_ratio=drop_ratio(led.dropped, led.sent),
            throughput=throughput(led.delivered, (tick + 1) * self.config.tick),
            partitioned=self.partitioned,
        ))

    # -- main loop --------------------------------------------------------

    def run(self) -> RunResult:
        cfg = self.config
        self.emit(0, EventKind.DEPLOY, nodes=cfg.node_count, clusters=len(self.clusters),
                  sink=cfg.sink_id, seed=cfg.seed)
        ticks = cfg.ticks
        first_partition = None
        for tick in range(ticks):
            count = self._event_count()
            if tick == 0:
                due = True
            elif cfg.election_period > 0:
                due = tick % cfg.election_period == 0
            else:
                due = count > 0
            if due:
                self.elect(tick)

            ok, bad = _reachable_nodes(self.network, self.clusters, self.overlay)
            self.partitioned = bool(bad)
            if bad and first_partition is None:
                first_partition = tick
            if bad or not ok:
                self.emit(tick, EventKind.PARTITION, unreachable=len(bad), reachable=len(ok),
                          full=not ok)
            if not ok:
                self.halted_tick = tick
                self._sample(tick)
                break

            for _ in range(count):
                source = self._pick_source()
                if source is None:
                    break
                self._send(tick, source)
                self._log_deaths(tick)

            if led_bad := self.ledger.in_flight:
                raise AccountingError(f"{led_bad} packets unaccounted at tick {tick}")
            if (tick + 1) % self.reporting_interval == 0 or tick == ticks - 1:
                self._sample(tick)

        summary = self.summary(first_partition)
        return RunResult(self.frames, self.trace, summary, self.ledger, self.network, self.clusters)

    def summary(self, first_partition: int | None) -> dict[str, Any]:
        led = self.ledger
        last = self.frames[-1] if self.frames else None
        ticks_run = (last.tick + 1) if last else 0
        return {
            "strategy": self.strategy.value,
            "seed": self.config.seed,
            "ticks_run": ticks_run,
            "halted_tick": self.halted_tick,
            "first_death_tick": self.first_death_tick,
            "first_partition_tick": first_partition,
            "final_alive_fraction": last.alive_fraction if last else 1.0,
            "final_residual_fraction": last.residual_fraction if last else 1.0,
            "sent": led.sent,
            "delivered": led.delivered,
            "dropped": led.dropped,
            "pdr": pdr(led.delivered, led.sent),
            "drop_ratio": drop_ratio(led.dropped, led.sent),
            "throughput": throughput(led.delivered, ticks_run * self.config.tick) if ticks_run else 0.0,
            "energy_drawn": led.energy_drawn,
            "control_energy": led.control_energy,
            "data_energy": led.data_energy,
            "discoveries": led.discoveries,
        }


def run(config: NetworkConfig, strategy: HeadStrategy | str = HeadStrategy.EDOCR,
        traffic: TrafficProfile | None = None, energy: EnergyModel | None = None,
        reporting_interval: int = 1, record_trace: bool = True, positions=None) -> RunResult:
    sim = Simulation(config, strategy, traffic, energy, reporting_interval, record_trace, positions)
    return sim.run()
