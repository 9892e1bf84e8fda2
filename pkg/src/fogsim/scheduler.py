"""Central orchestrator: placement, scaling, and the threshold-based offload loop.

Placement picks, among feasible hosts, the one minimizing source-to-host
latency, tie-broken by most free bottleneck capacity and then by node id.
The offload loop uses a high/low watermark pair for hysteresis: an edge
module above the high watermark sheds its largest Data-App instances until
it drops to the low watermark or nothing movable remains.

Decide and apply are split so that fault injection between them is testable:
actions are computed against a consistent snapshot and re-validated on apply.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import errors
from .catalog import AppKind, AppSpec, Catalog
from .discovery import InstallRequest
from .migration import StateBlob
from .topology import ResourceVector, Tier, Topology


class InstanceStatus(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    MIGRATING = "Migrating"
    STOPPED = "Stopped"


@dataclass
class AppInstance:
    instance_id: str
    app_id: str
    host: str
    replicas: int
    source: str  # data-source node the placement was requested for
    state: StateBlob
    bound_device: str | None = None
    status: InstanceStatus = InstanceStatus.RUNNING


@dataclass(frozen=True)
class Thresholds:
    high_watermark: float = 0.8
    low_watermark: float = 0.6

    def __post_init__(self):
        if not (0 < self.low_watermark < self.high_watermark <= 1):
            raise errors.InvariantViolation(
                f"thresholds must satisfy 0 < low < high <= 1, "
                f"got low={self.low_watermark}, high={self.high_watermark}")


@dataclass(frozen=True)
class PlacementRequest:
    app: str
    source: str
    replicas: int = 1

    def __post_init__(self):
        if self.replicas < 1:
            raise errors.ValidationError("replicas must be >= 1")


@dataclass(frozen=True)
class Offload:
    instance_id: str
    source_host: str
    target: str
    decided_at: int


@dataclass(frozen=True)
class Defer:
    node: str
    instance_id: str | None
    reason: str


Action = Offload | Defer


class Scheduler:
    def __init__(self, topology: Topology, catalog: Catalog,
                 thresholds: Thresholds | None = None):
        self.topology = topology
        self.catalog = catalog
        self.thresholds = thresholds or Thresholds()
        self.instances: dict[str, AppInstance] = {}
        self._counters: dict[str, int] = {}

    # -- helpers ---------------------------------------------------------------

    def _new_instance_id(self, app_id: str) -> str:
        n = self._counters.get(app_id, 0) + 1
        self._counters[app_id] = n
        return f"{app_id}-{n}"

    def instance(self, instance_id: str) -> AppInstance:
        try:
            return self.instances[instance_id]
        except KeyError:
            raise errors.UnknownInstance(instance_id) from None

    def bound_instance(self, device_id: str) -> AppInstance | None:
        for iid in sorted(self.instances):
            inst = self.instances[iid]
            if inst.bound_device == device_id:
                return inst
        return None

    def select_host(self, app: AppSpec, source: str, replicas: int,
                    exclude: frozenset[str] = frozenset(),
                    alloc_override: dict[str, list[float]] | None = None,
                    util_cap_after: float | None = None) -> str | None:
        """Best feasible host for `replicas` of `app` fed from `source`, or None.

        Feasible: node up, tier allowed, capacity for replicas x demand,
        reachable from source, and within the app's latency requirement.
        Objective: minimal source latency, then most free bottleneck capacity,
        then smallest node id. `alloc_override` substitutes tentative
        allocations (used by the offload loop); `util_cap_after` additionally
        rejects hosts that the placement would push above that utilization.
        """
        demand = app.demand.scaled(replicas)
        best_key = None
        best_host = None
        for node_id in sorted(self.topology.nodes):
            if node_id in exclude:
                continue
            node = self.topology.nodes[node_id]
            if not node.up or node.tier not in app.allowed_tiers:
                continue
            alloc = (alloc_override.get(node_id) if alloc_override else None)
            if alloc is None:
                alloc = [node.cpu_alloc, node.mem_alloc, node.storage_alloc]
            caps = [node.cpu_capacity, node.mem_capacity, node.storage_capacity]
            dem = [demand.cpu, demand.mem, demand.storage]
            if any(a + d > c for a, d, c in zip(alloc, dem, caps)):
                continue
            latency = self.topology.path_latency_or_inf(source, node_id)
            if latency == float("inf"):
                continue
            if (app.latency_requirement_ms is not None
                    and latency > app.latency_requirement_ms):
                continue
            util_now = max(a / c for a, c in zip(alloc, caps))
            if util_cap_after is not None:
                util_after = max((a + d) / c for a, d, c in zip(alloc, dem, caps))
                if util_after > util_cap_after:
                    continue
            key = (latency, util_now, node_id)
            if best_key is None or key < best_key:
                best_key = key
                best_host = node_id
        return best_host

    # -- placement and scaling ---------------------------------------------------

    def place(self, req: PlacementRequest) -> AppInstance:
        """Place a new instance on the best feasible host and reserve resources."""
        app = self.catalog.app(req.app)
        self.topology.node(req.source)
        host = self.select_host(app, req.source, req.replicas)
        if host is None:
            raise errors.Unschedulable(f"{req.app} from {req.source} x{req.replicas}")
        self.topology.reserve(host, app.demand.scaled(req.replicas))
        inst = AppInstance(self._new_instance_id(req.app), req.app, host,
                           req.replicas, req.source,
                           StateBlob(size_mb=app.state_size_mb))
        self.instances[inst.instance_id] = inst
        return inst

    def install_iot_app(self, request: InstallRequest,
                        preferences: dict | None = None) -> AppInstance:
        """Deploy the IoT-App for a freshly attached device on its gateway.

        Idempotent when the bound instance already runs there. Raises
        GatewayFull when the gateway lacks capacity (device stays attached
        but unmanaged; the caller records the warning).
        """
        app = self.catalog.app(request.app_id)
        existing = self.bound_instance(request.device_id)
        if existing is not None and existing.host == request.gateway and \
                existing.status in (InstanceStatus.RUNNING, InstanceStatus.MIGRATING):
            return existing
        gateway = self.topology.node(request.gateway)
        if not app.demand.fits_within(gateway.free):
            raise errors.GatewayFull(
                f"{request.gateway} cannot host {request.app_id} for {request.device_id}")
        self.topology.reserve(request.gateway, app.demand)
        state = StateBlob(size_mb=app.state_size_mb,
                          payload=dict(preferences or {}))
        inst = AppInstance(self._new_instance_id(request.app_id), request.app_id,
                           request.gateway, 1, request.gateway, state,
                           bound_device=request.device_id)
        self.instances[inst.instance_id] = inst
        return inst

    def scale(self, instance_id: str, new_replicas: int) -> AppInstance:
        """Adjust the reservation to new_replicas x demand on the current host."""
        if new_replicas < 1:
            raise errors.ValidationError("replicas must be >= 1")
        inst = self.instance(instance_id)
        if inst.status is not InstanceStatus.RUNNING:
            raise errors.InstanceNotRunning(instance_id)
        if new_replicas == inst.replicas:
            return inst
        app = self.catalog.app(inst.app_id)
        delta = new_replicas - inst.replicas
        if delta > 0:
            self.topology.reserve(inst.host, app.demand.scaled(delta))
        else:
            self.topology.release(inst.host, app.demand.scaled(-delta))
        inst.replicas = new_replicas
        return inst

    # -- threshold loop ------------------------------------------------------------

    def _bottleneck_fraction(self, app: AppSpec, replicas: int, node_id: str) -> float:
        node = self.topology.nodes[node_id]
        demand = app.demand.scaled(replicas)
        return max(demand.cpu / node.cpu_capacity,
                   demand.mem / node.mem_capacity,
                   demand.storage / node.storage_capacity)

    def check_thresholds(self, time: int) -> list[Action]:
        """Offload decisions for every edge module above the high watermark.

        Victims are Running Data-App instances, largest bottleneck reservation
        first; IoT-Apps are pinned to their device's gateway and never moved.
        Targets must absorb the instance without themselves crossing the high
        watermark, which keeps constant workloads flap-free. Decisions are
        computed against a tentative allocation snapshot so several actions in
        one tick stay mutually consistent.
        """
        actions: list[Action] = []
        # tentative allocations: node_id -> [cpu, mem, storage]
        alloc = {nid: [n.cpu_alloc, n.mem_alloc, n.storage_alloc]
                 for nid, n in self.topology.nodes.items()}

        def util(nid: str) -> float:
            node = self.topology.nodes[nid]
            caps = (node.cpu_capacity, node.mem_capacity, node.storage_capacity)
            return max(a / c for a, c in zip(alloc[nid], caps))

        for node_id in sorted(self.topology.nodes):
            node = self.topology.nodes[node_id]
            if node.tier is not Tier.EDGE_MODULE or not node.up:
                continue
            if util(node_id) <= self.thresholds.high_watermark:
                continue
            victims = []
            for iid in sorted(self.instances):
                inst = self.instances[iid]
                if inst.host != node_id or inst.status is not InstanceStatus.RUNNING:
                    continue
                app = self.catalog.app(inst.app_id)
                if app.kind is not AppKind.DATA_APP:
                    continue
                victims.append((inst, app))
            if not victims:
                actions.append(Defer(node_id, None, "NoMovableInstance"))
                continue
            victims.sort(key=lambda va: (
                -self._bottleneck_fraction(va[1], va[0].replicas, node_id),
                va[0].instance_id))
            deferred = False
            for inst, app in victims:
                if util(node_id) <= self.thresholds.low_watermark:
                    break
                target = self.select_host(
                    app, inst.source, inst.replicas,
                    exclude=frozenset({node_id}), alloc_override=alloc,
                    util_cap_after=self.thresholds.high_watermark)
                if target is None:
                    actions.append(Defer(node_id, inst.instance_id, "NoFeasibleTarget"))
                    deferred = True
                    continue
                actions.append(Offload(inst.instance_id, node_id, target, time))
                demand = app.demand.scaled(inst.replicas)
                for i, d in enumerate((demand.cpu, demand.mem, demand.storage)):
                    alloc[node_id][i] -= d
                    alloc[target][i] += d
            if util(node_id) > self.thresholds.high_watermark and not deferred:
                actions.append(Defer(node_id, None, "NoMovableInstance"))
        return actions

    def validate_action(self, action: Offload) -> AppInstance:
        """Re-check an offload decision against current state; StaleAction if
        the world moved underneath it."""
        inst = self.instances.get(action.instance_id)
        if inst is None or inst.status is not InstanceStatus.RUNNING \
                or inst.host != action.source_host:
            raise errors.StaleAction(action.instance_id)
        app = self.catalog.app(inst.app_id)
        target = self.topology.nodes.get(action.target)
        if target is None or not target.up or target.tier not in app.allowed_tiers:
            raise errors.StaleAction(f"{action.instance_id}: target {action.target}")
        if not app.demand.scaled(inst.replicas).fits_within(target.free):
            raise errors.StaleAction(f"{action.instance_id}: target {action.target} full")
        return inst
