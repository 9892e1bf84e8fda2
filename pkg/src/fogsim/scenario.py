"""Declarative scenario files: loading, validation, and construction of the
domain objects a run needs.

A scenario is one YAML document (schema_version 1) bundling the topology, the
application/device/firmware catalog, orchestrator thresholds, an ordered event
script, and fault injections. Everything a run does is stated here up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import errors
from .catalog import AppKind, AppSpec, Catalog, DeviceProfile, FirmwareEntry
from .kernel import Fault, FaultKind
from .scheduler import Thresholds
from .topology import ResourceVector, Tier, Topology

SCHEMA_VERSION = 1

_SCRIPT_TYPES = {"attach", "detach", "roam", "place", "scale", "workload",
                 "flow_advance"}

_REQUIRED_SCRIPT_FIELDS = {
    "attach": {"device", "gateway", "model"},
    "detach": {"device", "gateway"},
    "roam": {"device", "to_gateway"},
    "place": {"app", "source"},
    "scale": {"app", "replicas"},
    "workload": {"device", "data_rate_kbps"},
    "flow_advance": set(),
}


@dataclass
class Scenario:
    name: str
    duration_ms: int
    seed: int = 0
    scheduler_tick_ms: int = 1000
    buffer_mb: float = 10.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    nodes: list[dict] = field(default_factory=list)
    links: list[dict] = field(default_factory=list)
    apps: list[dict] = field(default_factory=list)
    devices: list[dict] = field(default_factory=list)
    firmware: list[dict] = field(default_factory=list)
    script: list[dict] = field(default_factory=list)
    faults: list[dict] = field(default_factory=list)

    # -- construction of run-time objects -------------------------------------

    def build_topology(self) -> Topology:
        topo = Topology()
        for n in self.nodes:
            topo.add_node(n["id"], Tier(n["tier"]), float(n["cpu"]),
                          float(n["mem"]), float(n["storage"]))
        for l in self.links:
            topo.add_link(l["a"], l["b"], float(l["latency_ms"]),
                          float(l["bandwidth_mbps"]), l.get("id"))
        return topo

    def build_catalog(self) -> Catalog:
        catalog = Catalog()
        for a in self.apps:
            tiers = a.get("allowed_tiers")
            spec = AppSpec(
                app_id=a["id"],
                kind=AppKind(a["kind"]),
                demand=ResourceVector(float(a.get("cpu", 0)),
                                      float(a.get("mem", 0)),
                                      float(a.get("storage", 0))),
                latency_requirement_ms=a.get("latency_requirement_ms"),
                aggregation_factor=float(a.get("aggregation_factor", 1)),
                state_size_mb=float(a.get("state_size_mb", 0)),
                allowed_tiers=frozenset(Tier(t) for t in tiers) if tiers else frozenset(),
            )
            catalog.register_app(spec)
        for d in self.devices:
            catalog.register_profile(DeviceProfile(
                d["model"], str(d["os_version"]), d.get("protocol", "other"),
                float(d["data_rate_kbps"]), d["iot_app"]))
        for f in self.firmware:
            catalog.register_firmware(FirmwareEntry(
                f["model"], str(f["os_version"]), str(f["version"])))
        return catalog

    def build_faults(self) -> list[Fault]:
        return [Fault(f["target"], FaultKind(f["kind"]), int(f["start"]),
                      int(f["duration_ms"])) for f in self.faults]


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise errors.ParseError(f"{context}: missing required field {key!r}")
    return mapping[key]


def scenario_from_dict(raw: dict) -> Scenario:
    """Validate a raw scenario mapping and return a fully checked Scenario."""
    if not isinstance(raw, dict):
        raise errors.ParseError("scenario must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise errors.ParseError(
            f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")

    topo_section = raw.get("topology", {}) or {}
    thresholds_raw = raw.get("thresholds", {}) or {}
    try:
        thresholds = Thresholds(float(thresholds_raw.get("high", 0.8)),
                                float(thresholds_raw.get("low", 0.6)))
    except (TypeError, ValueError) as exc:
        raise errors.ParseError(f"thresholds: {exc}") from None

    try:
        scenario = Scenario(
            name=str(raw.get("name", "unnamed")),
            duration_ms=int(_require(raw, "duration_ms", "scenario")),
            seed=int(raw.get("seed", 0)),
            scheduler_tick_ms=int(raw.get("scheduler_tick_ms", 1000)),
            buffer_mb=float(raw.get("buffer_mb", 10)),
            thresholds=thresholds,
            nodes=list(topo_section.get("nodes", []) or []),
            links=list(topo_section.get("links", []) or []),
            apps=list(raw.get("apps", []) or []),
            devices=list(raw.get("devices", []) or []),
            firmware=list(raw.get("firmware", []) or []),
            script=list(raw.get("script", []) or []),
            faults=list(raw.get("faults", []) or []),
        )
    except (TypeError, ValueError) as exc:
        raise errors.ParseError(str(exc)) from None

    _validate(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise errors.ParseError(f"no such scenario file: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise errors.ParseError(f"{path}: {exc}") from None
    return scenario_from_dict(raw)


def _validate(scenario: Scenario) -> None:
    if scenario.duration_ms <= 0:
        raise errors.InvariantViolation("duration_ms must be > 0")
    if scenario.scheduler_tick_ms <= 0:
        raise errors.InvariantViolation("scheduler_tick_ms must be > 0")
    if scenario.buffer_mb < 0:
        raise errors.InvariantViolation("buffer_mb must be >= 0")

    for section, key, context in ((scenario.nodes, "id", "node"),
                                  (scenario.apps, "id", "app"),
                                  (scenario.devices, "model", "device"),
                                  (scenario.firmware, "model", "firmware")):
        for entry in section:
            if not isinstance(entry, dict):
                raise errors.ParseError(f"{context} entries must be mappings")
            _require(entry, key, context)

    # structural build; topology/catalog invariants surface here
    try:
        topo = scenario.build_topology()
    except errors.UnknownNode as exc:
        raise errors.UnknownReference(f"link endpoint: {exc}") from None
    except errors.FogSimError as exc:
        raise errors.InvariantViolation(f"topology: {exc}") from None
    try:
        catalog = scenario.build_catalog()
    except errors.FogSimError as exc:
        raise errors.InvariantViolation(f"catalog: {exc}") from None
    except KeyError as exc:
        raise errors.ParseError(f"catalog: missing field {exc}") from None

    for profile in catalog.profiles.values():
        if profile.iot_app not in catalog.apps:
            raise errors.UnknownReference(
                f"device {profile.model} references unknown app {profile.iot_app}")

    gateways = {nid for nid, n in topo.nodes.items() if n.tier is Tier.GATEWAY}

    last_time = 0
    for i, entry in enumerate(scenario.script):
        ctx = f"script[{i}]"
        if not isinstance(entry, dict):
            raise errors.ParseError(f"{ctx}: entries must be mappings")
        etype = _require(entry, "type", ctx)
        if etype not in _SCRIPT_TYPES:
            raise errors.ParseError(f"{ctx}: unknown event type {etype!r}")
        time = _require(entry, "time", ctx)
        if not isinstance(time, int) or time < 0:
            raise errors.InvariantViolation(f"{ctx}: time must be a non-negative int")
        if time > scenario.duration_ms:
            raise errors.InvariantViolation(
                f"{ctx}: time {time} exceeds duration {scenario.duration_ms}")
        for required in _REQUIRED_SCRIPT_FIELDS[etype]:
            _require(entry, required, ctx)
        if etype == "attach":
            if entry["model"] not in catalog.profiles:
                raise errors.UnknownReference(f"{ctx}: unknown model {entry['model']}")
            if entry["gateway"] not in topo.nodes:
                raise errors.UnknownReference(f"{ctx}: unknown node {entry['gateway']}")
            if entry["gateway"] not in gateways:
                raise errors.InvariantViolation(
                    f"{ctx}: {entry['gateway']} is not a gateway")
        elif etype == "detach":
            if entry["gateway"] not in topo.nodes:
                raise errors.UnknownReference(f"{ctx}: unknown node {entry['gateway']}")
        elif etype == "roam":
            if entry["to_gateway"] not in gateways:
                raise errors.UnknownReference(
                    f"{ctx}: unknown gateway {entry['to_gateway']}")
        elif etype in ("place", "scale"):
            if entry["app"] not in catalog.apps:
                raise errors.UnknownReference(f"{ctx}: unknown app {entry['app']}")
            if etype == "place" and entry["source"] not in topo.nodes:
                raise errors.UnknownReference(f"{ctx}: unknown node {entry['source']}")
        elif etype == "workload":
            if float(entry["data_rate_kbps"]) <= 0:
                raise errors.InvariantViolation(f"{ctx}: data_rate must be > 0")
        last_time = max(last_time, time)

    for i, f in enumerate(scenario.faults):
        ctx = f"faults[{i}]"
        if not isinstance(f, dict):
            raise errors.ParseError(f"{ctx}: entries must be mappings")
        for key in ("target", "kind", "start", "duration_ms"):
            _require(f, key, ctx)
        try:
            kind = FaultKind(f["kind"])
        except ValueError:
            raise errors.ParseError(f"{ctx}: unknown fault kind {f['kind']!r}") from None
        target = f["target"]
        if kind is FaultKind.LINK_DOWN:
            if target not in topo.links:
                raise errors.UnknownReference(f"{ctx}: unknown link {target}")
        elif target not in topo.nodes:
            raise errors.UnknownReference(f"{ctx}: unknown node {target}")
        if kind is FaultKind.CLOUD_PARTITION and \
                topo.nodes[target].tier is not Tier.CENTRAL_CLOUD:
            raise errors.InvariantViolation(
                f"{ctx}: CloudPartition target must be the central cloud node")
        if int(f["duration_ms"]) <= 0:
            raise errors.InvariantViolation(f"{ctx}: duration_ms must be > 0")
