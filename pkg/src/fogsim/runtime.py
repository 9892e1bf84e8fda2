"""Wires topology, catalog, discovery, scheduler, migration and dataflow to
the event kernel and executes a scenario.

Flows are integrated lazily: every handler that can observe or change flow
state first advances all flows from the last synchronization point to the
current clock, so fluid counters are exact for piecewise-constant rates.
Metric windows close at every scheduler tick and at the end of the run.
"""

from __future__ import annotations

import math

from . import errors
from .dataflow import FlowManager
from .discovery import DiscoveryService
from .kernel import Event, EventKind, Fault, FaultKind, Kernel
from .migration import MigrationEngine, MigrationRecord
from .scenario import Scenario
from .scheduler import AppInstance, Defer, InstanceStatus, Offload, \
    PlacementRequest, Scheduler
from .topology import Tier


class Runtime:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.topology = scenario.build_topology()
        self.catalog = scenario.build_catalog()
        self.kernel = Kernel(scenario.seed)
        self.discovery = DiscoveryService(self.topology, self.catalog)
        self.scheduler = Scheduler(self.topology, self.catalog, scenario.thresholds)
        self.migrations = MigrationEngine(self.topology, self.catalog)
        self.flows = FlowManager(self.topology, self.catalog, self.discovery,
                                 self.scheduler, scenario.buffer_mb)
        self.migration_records: list[MigrationRecord] = []
        self._last_sync = 0
        self._window_start = 0
        self._partition_depth = 0
        self._deferred_ticks = 0
        self._fault_effects: dict[tuple, list[tuple[str, str]]] = {}
        self._rate_override: dict[str, float] = {}

        kernel = self.kernel
        kernel.fault_target_exists = self._fault_target_exists
        kernel.register(EventKind.ATTACH, self._on_attach)
        kernel.register(EventKind.DETACH, self._on_detach)
        kernel.register(EventKind.ROAM, self._on_roam)
        kernel.register(EventKind.WORKLOAD_CHANGE, self._on_workload)
        kernel.register(EventKind.FLOW_ADVANCE, lambda ev: self._sync())
        kernel.register(EventKind.SCHEDULER_TICK, self._on_tick)
        kernel.register(EventKind.MIGRATION_COMPLETE, self._on_migration_complete)
        kernel.register(EventKind.FAULT_START, self._on_fault_start)
        kernel.register(EventKind.FAULT_END, self._on_fault_end)
        kernel.register(EventKind.CUSTOM, self._on_custom)

        self._emit_scenario_loaded()
        self._schedule_script()

    # -- setup -------------------------------------------------------------------

    def _emit_scenario_loaded(self):
        nodes = {nid: {"tier": n.tier.value, "cpu": n.cpu_capacity,
                       "mem": n.mem_capacity, "storage": n.storage_capacity}
                 for nid, n in sorted(self.topology.nodes.items())}
        self.kernel.emit("scenario_loaded", self.scenario.name, {
            "nodes": nodes,
            "thresholds": {"high": self.scenario.thresholds.high_watermark,
                           "low": self.scenario.thresholds.low_watermark},
            "scheduler_tick_ms": self.scenario.scheduler_tick_ms,
            "buffer_mb": self.scenario.buffer_mb,
            "seed": self.scenario.seed,
            "duration_ms": self.scenario.duration_ms,
        })

    def _schedule_script(self):
        kind_by_type = {
            "attach": EventKind.ATTACH,
            "detach": EventKind.DETACH,
            "roam": EventKind.ROAM,
            "workload": EventKind.WORKLOAD_CHANGE,
            "flow_advance": EventKind.FLOW_ADVANCE,
        }
        for entry in self.scenario.script:
            etype = entry["type"]
            kind = kind_by_type.get(etype)
            if kind is None:
                self.kernel.schedule(entry["time"], EventKind.CUSTOM,
                                     {"op": etype, **entry})
            else:
                self.kernel.schedule(entry["time"], kind, dict(entry))
        for fault in self.scenario.build_faults():
            self.kernel.inject_fault(fault)
        tick = self.scenario.scheduler_tick_ms
        for t in range(tick, self.scenario.duration_ms + 1, tick):
            self.kernel.schedule(t, EventKind.SCHEDULER_TICK)

    def _fault_target_exists(self, fault: Fault) -> bool:
        if fault.kind is FaultKind.LINK_DOWN:
            return fault.target in self.topology.links
        return fault.target in self.topology.nodes

    # -- execution ------------------------------------------------------------------

    def run(self, until: int | None = None):
        """Run to `until` (default: scenario duration), close the final metrics
        window, and return the trace."""
        horizon = self.scenario.duration_ms if until is None else until
        self.kernel.run(horizon)
        if self.kernel.now < horizon:
            self.kernel.now = horizon
        self._sync()
        self._close_window()
        self.kernel.emit("run_end", self.scenario.name,
                         {"duration_ms": horizon,
                          "migrations": len(self.migration_records)})
        return self.kernel.trace

    def _sync(self):
        dt = self.kernel.now - self._last_sync
        if dt > 0:
            self.flows.advance_all(dt)
            self._last_sync = self.kernel.now

    def _warn(self, subject: str, reason: str, **details):
        self.kernel.emit("warning", subject, {"reason": reason, **details})

    # -- attach / detach / roam -------------------------------------------------------

    def _on_attach(self, event: Event):
        self._sync()
        p = event.payload
        self._do_attach(p["device"], p["gateway"], p["model"],
                        str(p.get("os_version", "")), p.get("preferences"))

    def _do_attach(self, device: str, gateway: str, model: str,
                   os_version: str, preferences=None):
        if not os_version and model in self.catalog.profiles:
            os_version = self.catalog.profiles[model].os_version
        try:
            outcome = self.discovery.handle_attach(gateway, device, model,
                                                   os_version, self.kernel.now)
        except errors.FogSimError as exc:
            self._warn(device, type(exc).__name__, gateway=gateway, detail=str(exc))
            return
        self.kernel.emit("attach", device, {
            "gateway": gateway, "model": model,
            "firmware_version": outcome.firmware_version})
        if outcome.firmware_version is None:
            self._warn(device, "NoCompatibleFirmware", model=model,
                       os_version=os_version)
        if outcome.install_request is None:
            return  # idempotent re-attach at the same gateway
        request = outcome.install_request
        self.kernel.emit("install_request", device,
                         {"app": request.app_id, "gateway": gateway})
        existing = self.scheduler.bound_instance(device)
        if existing is not None:
            if existing.status is InstanceStatus.STOPPED:
                self._warn(device, "BoundAppStopped", instance=existing.instance_id)
                return
            if existing.host != gateway:
                self._start_roam(device, existing, gateway)
                return
        try:
            inst = self.scheduler.install_iot_app(request, preferences)
        except errors.GatewayFull:
            self.kernel.emit("install_warning", device,
                             {"gateway": gateway, "reason": "GatewayFull"})
            return
        self.kernel.emit("instance_placed", inst.instance_id, {
            "app": inst.app_id, "host": inst.host, "replicas": inst.replicas,
            "device": device})
        self._open_device_flow(device, gateway, paused=False)

    def _on_detach(self, event: Event):
        self._sync()
        self._do_detach(event.payload["device"], event.payload["gateway"])

    def _do_detach(self, device: str, gateway: str):
        try:
            self.discovery.handle_detach(gateway, device, self.kernel.now)
        except errors.FogSimError as exc:
            self._warn(device, type(exc).__name__, gateway=gateway)
            return
        self.kernel.emit("detach", device, {"gateway": gateway})
        flow = self.flows.active_flow_for(device)
        if flow is not None:
            self.flows.close_flow(flow.flow_id)
            self.kernel.emit("flow_close", flow.flow_id, {"device": device})

    def _on_roam(self, event: Event):
        """Scripted roam: detach from the current gateway, attach at the new
        one; the attach path migrates the bound IoT-App."""
        self._sync()
        device = event.payload["device"]
        to_gateway = event.payload["to_gateway"]
        if self.scheduler.bound_instance(device) is None:
            self._warn(device, "NoBoundApp", to_gateway=to_gateway)
        current = self.discovery.current_gateway(device)
        attachment = self.discovery.attachments.get(device)
        if current is None or attachment is None:
            self._warn(device, "NotAttachedHere", to_gateway=to_gateway)
            return
        self._do_detach(device, current)
        self._do_attach(device, to_gateway, attachment.model, attachment.os_version)

    def _start_roam(self, device: str, instance: AppInstance, to_gateway: str):
        try:
            record = self.migrations.roam(instance, to_gateway, self.kernel.now)
        except errors.TargetGatewayFull:
            self.kernel.emit("roam_warning", device, {
                "to_gateway": to_gateway, "reason": "TargetGatewayFull",
                "instance": instance.instance_id})
            return
        except errors.FogSimError as exc:
            self._warn(device, type(exc).__name__, to_gateway=to_gateway)
            return
        if record.downtime_ms == 0 and record.from_node == record.to_node:
            self.kernel.emit("roam_completed", device, {
                "from": record.from_node, "to": record.to_node,
                "instance": instance.instance_id})
            return
        self.kernel.emit("migration_started", instance.instance_id, {
            "from": record.from_node, "to": record.to_node,
            "bytes_mb": record.bytes_moved_mb, "downtime_ms": record.downtime_ms})
        # sensor data produced during downtime buffers at the new gateway
        self._open_device_flow(device, to_gateway, paused=True)
        self.kernel.schedule(record.completed_at, EventKind.MIGRATION_COMPLETE,
                             {"instance": instance.instance_id, "device": device,
                              "roam": True})

    # -- flows ---------------------------------------------------------------------

    def _serving_instance(self, gateway: str) -> AppInstance | None:
        from .catalog import AppKind
        for iid in sorted(self.scheduler.instances):
            inst = self.scheduler.instances[iid]
            if inst.source != gateway:
                continue
            if inst.status not in (InstanceStatus.RUNNING, InstanceStatus.MIGRATING):
                continue
            if self.catalog.app(inst.app_id).kind is AppKind.DATA_APP:
                return inst
        return None

    def _nearest_edge(self, gateway: str) -> str | None:
        best = None
        for nid in sorted(self.topology.nodes):
            node = self.topology.nodes[nid]
            if node.tier is not Tier.EDGE_MODULE or not node.up:
                continue
            lat = self.topology.path_latency_or_inf(gateway, nid)
            if lat == math.inf:
                continue
            if best is None or (lat, nid) < best:
                best = (lat, nid)
        return best[1] if best else None

    def _open_device_flow(self, device: str, gateway: str, paused: bool):
        attachment = self.discovery.attachments[device]
        profile = self.catalog.profile(attachment.model)
        rate = self._rate_override.get(device, profile.data_rate_kbps)
        serving = self._serving_instance(gateway)
        if serving is not None:
            sink, serving_id = serving.host, serving.instance_id
        else:
            sink, serving_id = self._nearest_edge(gateway), None
        if sink is None:
            self._warn(device, "NoSink", gateway=gateway)
            return
        try:
            flow = self.flows.open_flow(device, gateway, sink, rate,
                                        serving_id, paused)
        except errors.FogSimError as exc:
            self._warn(device, type(exc).__name__, gateway=gateway, sink=sink)
            return
        self.kernel.emit("flow_open", flow.flow_id, {
            "device": device, "src": gateway, "sink": sink,
            "rate_kbps": rate, "paused": paused})

    def _on_workload(self, event: Event):
        self._sync()
        device = event.payload["device"]
        rate = float(event.payload["data_rate_kbps"])
        self._rate_override[device] = rate
        flow = self.flows.active_flow_for(device)
        if flow is not None:
            flow.rate_kbps = rate
        self.kernel.emit("workload_change", device, {"data_rate_kbps": rate})

    # -- scripted orchestration ops ----------------------------------------------------

    def _on_custom(self, event: Event):
        op = event.payload.get("op")
        if op == "place":
            self._op_place(event.payload)
        elif op == "scale":
            self._op_scale(event.payload)

    def _op_place(self, p: dict):
        self._sync()
        req = PlacementRequest(p["app"], p["source"], int(p.get("replicas", 1)))
        try:
            inst = self.scheduler.place(req)
        except errors.Unschedulable as exc:
            self._warn(p["app"], "Unschedulable", source=p["source"], detail=str(exc))
            return
        self.kernel.emit("instance_placed", inst.instance_id, {
            "app": inst.app_id, "host": inst.host, "replicas": inst.replicas,
            "source": inst.source})
        # existing flows from this source now have a serving Data-App
        for fid in sorted(self.flows.flows):
            flow = self.flows.flows[fid]
            if flow.active and flow.src == inst.source and flow.serving_instance is None:
                flow.sink = inst.host
                flow.serving_instance = inst.instance_id
                self.kernel.emit("flow_rebind", fid, {"sink": inst.host,
                                                      "serving": inst.instance_id})

    def _op_scale(self, p: dict):
        self._sync()
        app_id = p["app"]
        host = p.get("host")
        target = None
        for iid in sorted(self.scheduler.instances):
            inst = self.scheduler.instances[iid]
            if inst.app_id == app_id and inst.status is InstanceStatus.RUNNING \
                    and (host is None or inst.host == host):
                target = inst
                break
        if target is None:
            self._warn(app_id, "NoRunningInstance", host=host or "")
            return
        old = target.replicas
        try:
            self.scheduler.scale(target.instance_id, int(p["replicas"]))
        except errors.FogSimError as exc:
            self.kernel.emit("scale_warning", target.instance_id, {
                "reason": type(exc).__name__, "requested": int(p["replicas"])})
            return
        self.kernel.emit("scale", target.instance_id, {
            "replicas_from": old, "replicas_to": target.replicas,
            "host": target.host})

    # -- scheduler tick and threshold loop ----------------------------------------------

    def _on_tick(self, event: Event):
        self._sync()
        self._close_window()
        if self._partition_depth > 0:
            self._deferred_ticks += 1
            self.kernel.emit("scheduler_tick", "scheduler", {"skipped": True})
            return
        self.kernel.emit("scheduler_tick", "scheduler", {"skipped": False})
        self._run_threshold_loop()

    def _run_threshold_loop(self):
        actions = self.scheduler.check_thresholds(self.kernel.now)
        for action in actions:
            if isinstance(action, Defer):
                self.kernel.emit("defer", action.node, {
                    "instance": action.instance_id, "reason": action.reason})
                continue
            self._apply_offload(action)

    def _apply_offload(self, action: Offload):
        try:
            inst = self.scheduler.validate_action(action)
            record = self.migrations.start(inst, action.target, self.kernel.now)
        except (errors.StaleAction, errors.FogSimError) as exc:
            self.kernel.emit("stale_action", action.instance_id, {
                "target": action.target, "detail": str(exc)})
            return
        self.kernel.emit("offload", inst.instance_id, {
            "from": record.from_node, "to": record.to_node})
        self.kernel.emit("migration_started", inst.instance_id, {
            "from": record.from_node, "to": record.to_node,
            "bytes_mb": record.bytes_moved_mb, "downtime_ms": record.downtime_ms})
        self.kernel.schedule(record.completed_at, EventKind.MIGRATION_COMPLETE,
                             {"instance": inst.instance_id})

    def _on_migration_complete(self, event: Event):
        self._sync()
        iid = event.payload["instance"]
        inst = self.scheduler.instance(iid)
        record = self.migrations.complete(inst)
        self.migration_records.append(record)
        self.kernel.emit("migration_completed", iid, {
            "from": record.from_node, "to": record.to_node,
            "started_at": record.started_at, "completed_at": record.completed_at,
            "bytes_moved_mb": record.bytes_moved_mb,
            "downtime_ms": record.downtime_ms,
            "state_version": inst.state.version, "replicas": inst.replicas})
        if event.payload.get("roam"):
            device = event.payload["device"]
            flow = self.flows.active_flow_for(device)
            if flow is not None and flow.paused:
                flow.paused = False
                self.kernel.emit("flow_resume", flow.flow_id, {
                    "src": flow.src, "sink": flow.sink})
            self.kernel.emit("roam_completed", device, {
                "from": record.from_node, "to": record.to_node, "instance": iid})
            self.kernel.emit("status_update", device, {
                "gateway": inst.host, "instance": iid,
                "state_version": inst.state.version})
        else:
            for fid in sorted(self.flows.flows):
                flow = self.flows.flows[fid]
                if flow.active and flow.serving_instance == iid:
                    flow.sink = inst.host
                    self.kernel.emit("flow_rebind", fid, {"sink": inst.host,
                                                          "serving": iid})

    # -- metric windows ------------------------------------------------------------------

    def _close_window(self):
        now = self.kernel.now
        if now <= self._window_start:
            return
        extra = 0.0
        if self.flows.uplink_pending > 0 and self._partition_depth == 0:
            extra = self.flows.flush_pending_uplink()
        metrics = self.flows.close_window(self._window_start, now, extra)
        for f in metrics.flows:
            self.kernel.emit("flow_window", f["flow"], f)
        dt = now - self._window_start
        for link_id in sorted(metrics.links):
            link = self.topology.links[link_id]
            self.kernel.emit("link_window", link_id, {
                "delivered_mb": metrics.links[link_id],
                "capacity_mb": link.bandwidth_mbps * dt / 8000.0})
        alloc = {nid: {"cpu": n.cpu_alloc, "mem": n.mem_alloc,
                       "storage": n.storage_alloc}
                 for nid, n in sorted(self.topology.nodes.items())}
        statuses = {iid: self.scheduler.instances[iid].status.value
                    for iid in sorted(self.scheduler.instances)}
        self.kernel.emit("metrics_window", "network", {
            "window_start": self._window_start,
            "window_end": now,
            "generated_mb": metrics.generated_mb,
            "delivered_mb": metrics.delivered_mb,
            "dropped_mb": metrics.dropped_mb,
            "uplink_mb": metrics.uplink_mb,
            "uplink_ratio": metrics.ratio_or_none(),
            "utilization": self.topology.utilization_snapshot(),
            "alloc": alloc,
            "instances": statuses,
        })
        self._window_start = now

    # -- faults -----------------------------------------------------------------------

    def _on_fault_start(self, event: Event):
        self._sync()
        fault: Fault = event.payload["fault"]
        key = (fault.target, fault.kind.value, fault.start)
        affected: list[tuple[str, str]] = []
        if fault.kind is FaultKind.LINK_DOWN:
            link = self.topology.link(fault.target)
            if link.up:
                link.up = False
                affected.append(("link", link.link_id))
        elif fault.kind is FaultKind.NODE_DOWN:
            node = self.topology.node(fault.target)
            if node.up:
                node.up = False
                affected.append(("node", node.node_id))
        else:  # CloudPartition: every link incident to the central cloud node
            for lid in self.topology._adjacency[fault.target]:
                link = self.topology.links[lid]
                if link.up:
                    link.up = False
                    affected.append(("link", lid))
            self._partition_depth += 1
        self._fault_effects[key] = affected
        self.kernel.emit("fault_start", fault.target, {
            "fault_kind": fault.kind.value, "duration_ms": fault.duration})

    def _on_fault_end(self, event: Event):
        self._sync()
        fault: Fault = event.payload["fault"]
        key = (fault.target, fault.kind.value, fault.start)
        for what, target_id in self._fault_effects.pop(key, []):
            if what == "link":
                self.topology.links[target_id].up = True
            else:
                self.topology.nodes[target_id].up = True
        if fault.kind is FaultKind.CLOUD_PARTITION:
            self._partition_depth -= 1
        self.kernel.emit("fault_end", fault.target,
                         {"fault_kind": fault.kind.value})
        if fault.kind is FaultKind.CLOUD_PARTITION and \
                self._partition_depth == 0 and self._deferred_ticks > 0:
            replay = self._deferred_ticks
            self._deferred_ticks = 0
            for _ in range(replay):
                self.kernel.emit("scheduler_tick", "scheduler",
                                 {"skipped": False, "replayed": True})
                self._run_threshold_loop()
