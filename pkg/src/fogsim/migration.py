"""Stateful move operations: IoT-App roaming between gateways and Data-App
offloads between edge modules and the central cloud.

Migrations are stop-and-copy: the instance halts, its state blob is copied
over the network, and it resumes on the target. Downtime equals transfer
time, which makes the cost exactly computable. Container images are assumed
pre-provisioned; only state transfer costs time.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from . import errors
from .catalog import Catalog
from .topology import Link, Tier, Topology

if TYPE_CHECKING:
    from .scheduler import AppInstance


@dataclass
class StateBlob:
    """Mutable application state carried across migrations (includes user status)."""

    size_mb: float = 0.0
    version: int = 1
    payload: dict = field(default_factory=dict)

    def update(self, **entries) -> None:
        self.payload.update(entries)
        self.version += 1

    def snapshot(self) -> "StateBlob":
        return StateBlob(self.size_mb, self.version, copy.deepcopy(self.payload))


@dataclass(frozen=True)
class MigrationRecord:
    instance_id: str
    from_node: str
    to_node: str
    started_at: int
    completed_at: int
    bytes_moved_mb: float
    downtime_ms: int


def transfer_duration(size_mb: float, path: list[Link]) -> int:
    """Transfer time in ms for a state blob over a link path.

    duration = size * 8 / (min bandwidth along path, Mbps) * 1000
             + sum of link latencies, rounded up to whole ms.
    """
    if not path:
        raise errors.ValidationError("transfer path must be non-empty")
    for link in path:
        if not link.up:
            raise errors.LinkDown(link.link_id)
    min_bw = min(link.bandwidth_mbps for link in path)
    latency = sum(link.latency_ms for link in path)
    return math.ceil(size_mb * 8.0 / min_bw * 1000.0 + latency)


class MigrationEngine:
    """Executes migrations in two phases: start (reserve target, snapshot,
    mark Migrating) and complete (release source, resume on target).

    Between the phases the instance's resources are reserved on both nodes,
    never on neither.
    """

    def __init__(self, topology: Topology, catalog: Catalog):
        self.topology = topology
        self.catalog = catalog
        # instance_id -> (record, state snapshot, reserved demand)
        self._pending: dict[str, tuple] = {}

    def in_flight(self, instance_id: str) -> bool:
        return instance_id in self._pending

    def start(self, instance: "AppInstance", target: str, time: int) -> MigrationRecord:
        """Begin a stop-and-copy move. Returns the (fully determined) record;
        the caller schedules completion at record.completed_at."""
        from .scheduler import InstanceStatus  # local import avoids a cycle

        if instance.status is not InstanceStatus.RUNNING:
            raise errors.InstanceNotRunning(instance.instance_id)
        app = self.catalog.app(instance.app_id)
        if target == instance.host:
            return MigrationRecord(instance.instance_id, instance.host, target,
                                   time, time, 0.0, 0)
        target_node = self.topology.node(target)
        if not target_node.up or target_node.tier not in app.allowed_tiers:
            raise errors.TargetInfeasible(f"{instance.instance_id} -> {target}")
        demand = app.demand.scaled(instance.replicas)
        if not demand.fits_within(target_node.free):
            raise errors.TargetInfeasible(
                f"{instance.instance_id} -> {target}: insufficient capacity")
        if app.latency_requirement_ms is not None:
            lat = self.topology.path_latency_or_inf(instance.source, target)
            if lat > app.latency_requirement_ms:
                raise errors.TargetInfeasible(
                    f"{instance.instance_id} -> {target}: latency {lat} ms "
                    f"exceeds {app.latency_requirement_ms} ms")
        try:
            path = self.topology.shortest_path(instance.host, target)
        except errors.Unreachable:
            raise errors.TargetInfeasible(
                f"{instance.instance_id} -> {target}: no up path") from None

        snapshot = instance.state.snapshot()
        duration = transfer_duration(snapshot.size_mb, path)
        self.topology.reserve(target, demand)
        instance.status = InstanceStatus.MIGRATING
        record = MigrationRecord(instance.instance_id, instance.host, target,
                                 time, time + duration, snapshot.size_mb, duration)
        self._pending[instance.instance_id] = (record, snapshot, demand)
        return record

    def complete(self, instance: "AppInstance") -> MigrationRecord:
        """Finish the move: release the source, resume on the target with the
        state snapshot taken at start (version preserved)."""
        from .scheduler import InstanceStatus

        record, snapshot, demand = self._pending.pop(instance.instance_id)
        self.topology.release(record.from_node, demand)
        instance.host = record.to_node
        instance.state = snapshot
        instance.status = InstanceStatus.RUNNING
        return record

    def roam(self, instance: "AppInstance", to_gateway: str, time: int) -> MigrationRecord:
        """Move a device's IoT-App to the gateway the device roamed to.

        When the target gateway lacks capacity the instance stays on the old
        gateway, Stopped; the caller records the warning.
        """
        from .scheduler import InstanceStatus

        app = self.catalog.app(instance.app_id)
        if to_gateway == instance.host:
            return MigrationRecord(instance.instance_id, instance.host, to_gateway,
                                   time, time, 0.0, 0)
        target_node = self.topology.node(to_gateway)
        demand = app.demand.scaled(instance.replicas)
        if not target_node.up or not demand.fits_within(target_node.free):
            instance.status = InstanceStatus.STOPPED
            raise errors.TargetGatewayFull(
                f"{to_gateway} cannot host {instance.instance_id}")
        return self.start(instance, to_gateway, time)
