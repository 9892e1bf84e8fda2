"""Three-tier node graph with link latency/bandwidth and per-node resource accounting.

Nodes live in one of three tiers (central cloud, edge module, IoT gateway)
and carry CPU (millicores), memory (MB) and storage (MB) capacities.
Reservations are all-or-nothing so accounting stays auditable.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum

from . import errors


class Tier(str, Enum):
    CENTRAL_CLOUD = "CentralCloud"
    EDGE_MODULE = "EdgeModule"
    GATEWAY = "Gateway"


@dataclass(frozen=True)
class ResourceVector:
    """A (cpu, mem, storage) demand or allocation. cpu in millicores, mem/storage in MB."""

    cpu: float = 0.0
    mem: float = 0.0
    storage: float = 0.0

    def __post_init__(self):
        if self.cpu < 0 or self.mem < 0 or self.storage < 0:
            raise errors.ValidationError(f"resource components must be >= 0: {self}")

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu + other.cpu, self.mem + other.mem,
                              self.storage + other.storage)

    def __sub__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(self.cpu - other.cpu, self.mem - other.mem,
                              self.storage - other.storage)

    def scaled(self, factor: float) -> "ResourceVector":
        return ResourceVector(self.cpu * factor, self.mem * factor, self.storage * factor)

    def fits_within(self, other: "ResourceVector") -> bool:
        return (self.cpu <= other.cpu and self.mem <= other.mem
                and self.storage <= other.storage)


@dataclass
class Node:
    node_id: str
    tier: Tier
    cpu_capacity: float
    mem_capacity: float
    storage_capacity: float
    cpu_alloc: float = 0.0
    mem_alloc: float = 0.0
    storage_alloc: float = 0.0
    up: bool = True

    @property
    def capacity(self) -> ResourceVector:
        return ResourceVector(self.cpu_capacity, self.mem_capacity, self.storage_capacity)

    @property
    def allocated(self) -> ResourceVector:
        return ResourceVector(self.cpu_alloc, self.mem_alloc, self.storage_alloc)

    @property
    def free(self) -> ResourceVector:
        return self.capacity - self.allocated

    def utilization(self) -> float:
        """Bottleneck utilization: the largest per-resource allocated fraction."""
        return max(self.cpu_alloc / self.cpu_capacity,
                   self.mem_alloc / self.mem_capacity,
                   self.storage_alloc / self.storage_capacity)


@dataclass
class Link:
    link_id: str
    a: str
    b: str
    latency_ms: float
    bandwidth_mbps: float
    up: bool = True

    def other_end(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


@dataclass
class Topology:
    """Mutable node/link graph. Mutated only by the simulation kernel."""

    nodes: dict[str, Node] = field(default_factory=dict)
    links: dict[str, Link] = field(default_factory=dict)
    _adjacency: dict[str, list[str]] = field(default_factory=dict)

    # -- construction --------------------------------------------------------

    def add_node(self, node_id: str, tier: Tier, cpu_capacity: float,
                 mem_capacity: float, storage_capacity: float) -> str:
        if node_id in self.nodes:
            raise errors.DuplicateNodeId(node_id)
        if cpu_capacity <= 0 or mem_capacity <= 0 or storage_capacity <= 0:
            raise errors.InvalidCapacity(
                f"{node_id}: capacities must be > 0 "
                f"(cpu={cpu_capacity}, mem={mem_capacity}, storage={storage_capacity})")
        self.nodes[node_id] = Node(node_id, Tier(tier), cpu_capacity,
                                   mem_capacity, storage_capacity)
        self._adjacency[node_id] = []
        return node_id

    def add_link(self, a: str, b: str, latency_ms: float, bandwidth_mbps: float,
                 link_id: str | None = None) -> str:
        if a not in self.nodes:
            raise errors.UnknownNode(a)
        if b not in self.nodes:
            raise errors.UnknownNode(b)
        if a == b:
            raise errors.SelfLoop(a)
        if bandwidth_mbps <= 0:
            raise errors.NonPositiveBandwidth(f"{a}-{b}: {bandwidth_mbps}")
        if latency_ms < 0:
            raise errors.ValidationError(f"{a}-{b}: latency must be >= 0")
        if link_id is None:
            link_id = f"{a}--{b}"
        if link_id in self.links:
            raise errors.ValidationError(f"duplicate link id {link_id}")
        self.links[link_id] = Link(link_id, a, b, latency_ms, bandwidth_mbps)
        self._adjacency[a].append(link_id)
        self._adjacency[b].append(link_id)
        return link_id

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise errors.UnknownNode(node_id) from None

    def link(self, link_id: str) -> Link:
        try:
            return self.links[link_id]
        except KeyError:
            raise errors.UnknownTarget(link_id) from None

    # -- routing ---------------------------------------------------------------

    def shortest_path(self, a: str, b: str) -> list[Link]:
        """Minimum-latency path over up links between up nodes, as a link list.

        Empty list when a == b. Raises Unreachable when no up path exists.
        Ties broken deterministically by (latency, hop node ids).
        """
        self.node(a)
        self.node(b)
        if a == b:
            return []
        # Dijkstra keyed by (latency, path node ids) for deterministic ties.
        best: dict[str, float] = {a: 0.0}
        heap: list[tuple[float, list[str], str, list[str]]] = [(0.0, [a], a, [])]
        while heap:
            dist, path_nodes, here, path_links = heapq.heappop(heap)
            if here == b:
                return [self.links[lid] for lid in path_links]
            if dist > best.get(here, math.inf):
                continue
            for lid in self._adjacency[here]:
                link = self.links[lid]
                if not link.up:
                    continue
                nxt = link.other_end(here)
                if not self.nodes[nxt].up:
                    continue
                ndist = dist + link.latency_ms
                if ndist < best.get(nxt, math.inf):
                    best[nxt] = ndist
                    heapq.heappush(heap, (ndist, path_nodes + [nxt], nxt,
                                          path_links + [lid]))
        raise errors.Unreachable(f"{a} -> {b}")

    def path_latency(self, a: str, b: str) -> float:
        """Shortest-path latency in ms over up links; 0 when a == b."""
        return sum(link.latency_ms for link in self.shortest_path(a, b))

    def path_latency_or_inf(self, a: str, b: str) -> float:
        try:
            return self.path_latency(a, b)
        except errors.Unreachable:
            return math.inf

    # -- resource accounting ---------------------------------------------------

    def reserve(self, node_id: str, demand: ResourceVector) -> None:
        """Reserve a demand vector on a node, all-or-nothing."""
        node = self.node(node_id)
        if not demand.fits_within(node.free):
            raise errors.InsufficientCapacity(
                f"{node_id}: demand {demand} exceeds free {node.free}")
        node.cpu_alloc += demand.cpu
        node.mem_alloc += demand.mem
        node.storage_alloc += demand.storage

    def release(self, node_id: str, demand: ResourceVector) -> None:
        node = self.node(node_id)
        if not demand.fits_within(node.allocated):
            raise errors.ReleaseUnderflow(
                f"{node_id}: release {demand} exceeds allocated {node.allocated}")
        node.cpu_alloc -= demand.cpu
        node.mem_alloc -= demand.mem
        node.storage_alloc -= demand.storage

    def utilization(self, node_id: str) -> float:
        return self.node(node_id).utilization()

    def utilization_snapshot(self) -> dict[str, float]:
        return {nid: n.utilization() for nid, n in sorted(self.nodes.items())}
