"""Cluster formation and cluster-head election.

Election strategies
-------------------
``edocr``
    Two steps. A single *local head* is chosen network-wide from residual
    energy, then random cost, then lowest id. Every other cluster takes the
    member with the highest energy density measured against that local head.
``max_residual``
    Each cluster takes its highest-residual member.
``random_rotation``
    Each cluster takes a uniformly random alive member.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .net_model import ConfigError, Network, NetworkConfig, distance

log = logging.getLogger(__name__)

COST_RANGE = 250
DENSITY_EPS = 1e-6


class ElectionError(RuntimeError):
    """Raised when a cluster has no alive member to elect."""


class HeadStrategy(str, Enum):
    EDOCR = "edocr"
    MAX_RESIDUAL = "max_residual"
    RANDOM_ROTATION = "random_rotation"


@dataclass
class Cluster:
    id: int
    members: list[int]
    head: int | None = None

    def __post_init__(self):
        if not self.members:
            raise ValueError(f"cluster {self.id} has no members")
        self.members = sorted(self.members)


@dataclass(frozen=True)
class NodeCost:
    node: int
    cost: int


@dataclass(frozen=True)
class EnergyDensity:
    node: int
    value: float


@dataclass
class Election:
    """Outcome of one election round."""

    heads: dict[int, int]  # cluster id -> head node id
    local_head: int | None = None
    local_cluster: int | None = None
    costs: dict[int, int] = field(default_factory=dict)
    densities: dict[int, float] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)


def generate_clusters(positions: np.ndarray, config: NetworkConfig, rng: np.random.Generator) -> list[Cluster]:
    """Partition the sensor nodes into ``config.cluster_count`` non-empty clusters.

    ``positions`` holds the sensor nodes only (the sink is never clustered).
    """
    n = len(positions)
    m = config.cluster_count
    if m > n:
        raise ConfigError("node_count ≥ cluster_count")
    if config.cluster_method == "grid":
        labels = _grid_labels(positions, config)
    else:
        labels = _kmeans_labels(positions, m, rng)
    groups: dict[int, list[int]] = {}
    for node_id, label in enumerate(labels):
        groups.setdefault(int(label), []).append(node_id)
    # stable ids: order clusters by their smallest member
    ordered = sorted(groups.values(), key=min)
    return [Cluster(i, members) for i, members in enumerate(ordered)]


def _kmeans_labels(positions: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    from sklearn.cluster import KMeans

    if m == len(positions):
        return np.arange(m)
    seed = int(rng.integers(0, 2**31 - 1))
    km = KMeans(n_clusters=m, n_init=10, random_state=seed)
    labels = km.fit_predict(positions)
    if len(set(labels.tolist())) != m:
        # coincident points can leave a centroid empty
        raise ConfigError(f"k-means produced fewer than {m} clusters")
    return labels


def _grid_labels(positions: np.ndarray, config: NetworkConfig) -> np.ndarray:
    """Vertical strips of equal node count, ordered by x then y."""
    n, m = len(positions), config.cluster_count
    order = np.lexsort((positions[:, 1], positions[:, 0]))
    labels = np.empty(n, dtype=int)
    for rank, node_id in enumerate(order):
        labels[node_id] = rank * m // n
    return labels


def node_cost(rng: np.random.Generator) -> int:
    return int(rng.random() * COST_RANGE)


def draw_costs(node_ids: Sequence[int], rng: np.random.Generator) -> dict[int, int]:
    """One cost per node, drawn in ascending id order.

    Same stream as calling :func:`node_cost` once per node.
    """
    ids = sorted(node_ids)
    draws = (rng.random(len(ids)) * COST_RANGE).astype(int)
    return dict(zip(ids, draws.tolist()))


def _lex_key(node_id: int, residuals, costs) -> tuple:
    # max of this key = highest residual, then highest cost, then lowest id
    return (residuals[node_id], costs[node_id], -node_id)


def select_local_head(cluster: Cluster | Sequence[int], residuals, costs, alive=None) -> int:
    members = cluster.members if isinstance(cluster, Cluster) else list(cluster)
    if alive is not None:
        members = [i for i in members if alive[i]]
    if not members:
        raise ElectionError("no alive member")
    return max(members, key=lambda i: _lex_key(i, residuals, costs))


def energy_density(node: int, local_head: int, network: Network) -> EnergyDensity:
    """Neighbourhood residual energy over (distance to local head * coverage range)."""
    nodes = network.nodes
    total = nodes[node].residual_energy + math.fsum(
        nodes[j].residual_energy for j in sorted(network.neighbors(node))
    )
    d = max(network.dist[node, local_head], DENSITY_EPS)
    return EnergyDensity(node, total / (d * network.config.coverage_range))


def energy_densities(network: Network, local_head: int, residuals: np.ndarray | None = None) -> np.ndarray:
    """Vectorised energy density of every sensor node against ``local_head``."""
    if residuals is None:
        residuals = network.residuals()
    alive = residuals > 0
    neigh = network.coverage_adj.astype(float) @ np.where(alive, residuals, 0.0)
    n = network.config.node_count
    d = np.maximum(network.dist[:n, local_head], DENSITY_EPS)
    return (residuals + neigh) / (d * network.config.coverage_range)


def select_heads_edocr(clusters: list[Cluster], network: Network, rng: np.random.Generator,
                       residuals: np.ndarray | None = None) -> Election:
    if residuals is None:
        residuals = network.residuals()
    alive = network.alive_mask()
    alive_ids = [i for i in range(len(alive)) if alive[i]]
    costs = draw_costs(alive_ids, rng)
    election = Election(heads={}, costs=costs)
    if not alive_ids:
        election.skipped = [c.id for c in clusters]
        _apply(clusters, election)
        return election

    local_head = max(alive_ids, key=lambda i: _lex_key(i, residuals, costs))
    local_cluster = next(c for c in clusters if local_head in c.members)
    election.local_head = local_head
    election.local_cluster = local_cluster.id
    election.heads[local_cluster.id] = local_head

    dens = energy_densities(network, local_head, residuals)
    for c in clusters:
        if c.id == local_cluster.id:
            continue
        live = [i for i in c.members if alive[i]]
        if not live:
            log.debug("cluster %d has no alive member; skipped", c.id)
            election.skipped.append(c.id)
            continue
        head = max(live, key=lambda i: (dens[i], -i))
        election.heads[c.id] = head
        election.densities.update({i: float(dens[i]) for i in live})
    _apply(clusters, election)
    return election


def select_heads_baseline(strategy: HeadStrategy | str, clusters: list[Cluster], network: Network,
                          rng: np.random.Generator, residuals: np.ndarray | None = None) -> Election:
    strategy = HeadStrategy(strategy)
    if strategy is HeadStrategy.EDOCR:
        return select_heads_edocr(clusters, network, rng, residuals)
    if residuals is None:
        residuals = network.residuals()
    alive = network.alive_mask()
    election = Election(heads={})
    for c in clusters:
        live = [i for i in c.members if alive[i]]
        if not live:
            log.debug("cluster %d has no alive member; skipped", c.id)
            election.skipped.append(c.id)
            continue
        if strategy is HeadStrategy.MAX_RESIDUAL:
            head = max(live, key=lambda i: (residuals[i], -i))
        else:
            head = live[int(rng.integers(len(live)))]
        election.heads[c.id] = head
    _apply(clusters, election)
    return election


def elect(strategy: HeadStrategy | str, clusters: list[Cluster], network: Network,
          rng: np.random.Generator) -> Election:
    return select_heads_baseline(strategy, clusters, network, rng)


def _apply(clusters: list[Cluster], election: Election) -> None:
    for c in clusters:
        c.head = election.heads.get(c.id)
