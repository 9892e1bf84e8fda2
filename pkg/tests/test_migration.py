from __future__ import annotations

import pytest

from fogsim import errors
from fogsim.discovery import InstallRequest
from fogsim.migration import MigrationEngine, StateBlob, transfer_duration
from fogsim.scheduler import InstanceStatus, PlacementRequest, Scheduler
from fogsim.topology import Link, ResourceVector, Tier, Topology


def link(latency, bw):
    return Link("l", "a", "b", latency, bw)


def test_transfer_duration_reference_case():
    # 100 MB over a 100 Mbps / 2 ms hop: 8000 ms serialization + 2 ms latency
    assert transfer_duration(100, [link(2, 100)]) == 8002


def test_transfer_duration_bottleneck_and_latency_sum():
    path = [link(2, 100), link(20, 1000)]
    assert transfer_duration(100, path) == 8022


def test_transfer_duration_rounds_up():
    assert transfer_duration(0.001, [link(1, 100)]) == 2  # 0.08 ms + 1 ms -> 2


def test_transfer_duration_zero_payload_still_pays_latency():
    assert transfer_duration(0, [link(5, 100)]) == 5


def test_transfer_duration_empty_path_rejected():
    with pytest.raises(errors.ValidationError):
        transfer_duration(10, [])


def test_transfer_duration_link_down():
    down = link(2, 100)
    down.up = False
    with pytest.raises(errors.LinkDown):
        transfer_duration(10, [down])


def test_state_blob_update_and_snapshot():
    blob = StateBlob(size_mb=1, payload={"hr": 60})
    snap = blob.snapshot()
    blob.update(hr=90)
    assert blob.version == 2
    assert snap.version == 1 and snap.payload == {"hr": 60}


# --- engine -------------------------------------------------------------------


@pytest.fixture
def world(three_tier, catalog):
    scheduler = Scheduler(three_tier, catalog)
    engine = MigrationEngine(three_tier, catalog)
    return three_tier, scheduler, engine


def test_migrate_data_app_to_cloud(world):
    topo, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    inst.state.update(model="v1")
    record = engine.start(inst, "cloud", 1000)
    # both reservations held while the copy is in flight
    assert inst.status is InstanceStatus.MIGRATING
    assert topo.node("edge1").allocated.mem == 4096
    assert topo.node("cloud").allocated.mem == 4096
    assert record.downtime_ms == transfer_duration(
        10, topo.shortest_path("edge1", "cloud"))
    assert record.completed_at == 1000 + record.downtime_ms
    done = engine.complete(inst)
    assert inst.host == "cloud"
    assert inst.status is InstanceStatus.RUNNING
    assert inst.state.payload == {"model": "v1"}  # state travels with the app
    assert topo.node("edge1").allocated.mem == 0
    assert done is record or done == record


def test_migrate_same_host_is_noop(world):
    _, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    record = engine.start(inst, "edge1", 500)
    assert record.downtime_ms == 0 and record.bytes_moved_mb == 0
    assert inst.status is InstanceStatus.RUNNING
    assert not engine.in_flight(inst.instance_id)


def test_migrate_requires_running_instance(world):
    _, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    inst.status = InstanceStatus.STOPPED
    with pytest.raises(errors.InstanceNotRunning):
        engine.start(inst, "cloud", 0)


def test_migrate_data_app_to_gateway_infeasible(world):
    _, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    with pytest.raises(errors.TargetInfeasible):
        engine.start(inst, "gw2", 0)


def test_migrate_to_full_target_infeasible(world):
    topo, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    topo.reserve("cloud", ResourceVector(0, 98304, 0))
    with pytest.raises(errors.TargetInfeasible):
        engine.start(inst, "cloud", 0)
    assert inst.status is InstanceStatus.RUNNING


def test_migrate_latency_budget_checked_against_source(three_tier, catalog):
    # cloud is 22 ms from gw1; tighten the budget below that
    from fogsim.catalog import AppKind, AppSpec
    catalog.register_app(AppSpec("strict", AppKind.DATA_APP,
                                 ResourceVector(100, 512, 128),
                                 latency_requirement_ms=10, state_size_mb=1))
    scheduler = Scheduler(three_tier, catalog)
    engine = MigrationEngine(three_tier, catalog)
    inst = scheduler.place(PlacementRequest("strict", "gw1"))
    with pytest.raises(errors.TargetInfeasible):
        engine.start(inst, "cloud", 0)


def test_migrate_unreachable_target(world):
    topo, scheduler, engine = world
    inst = scheduler.place(PlacementRequest("analytics", "gw1"))
    topo.links["edge1--cloud"].up = False
    with pytest.raises(errors.TargetInfeasible):
        engine.start(inst, "cloud", 0)


def test_roam_between_gateways(world):
    topo, scheduler, engine = world
    inst = scheduler.install_iot_app(InstallRequest("dev1", "gw1", "agent"))
    inst.state.update(steps=1200)
    record = engine.roam(inst, "gw2", 2000)
    # 1 MB over gw1-edge1-gw2: 80 ms + 4 ms latency
    assert record.downtime_ms == 84
    assert inst.status is InstanceStatus.MIGRATING
    engine.complete(inst)
    assert inst.host == "gw2"
    assert inst.state.payload == {"steps": 1200}
    assert topo.node("gw1").allocated.mem == 0
    assert topo.node("gw2").allocated.mem == 64


def test_roam_to_full_gateway_stops_instance(world):
    topo, scheduler, engine = world
    inst = scheduler.install_iot_app(InstallRequest("dev1", "gw1", "agent"))
    topo.reserve("gw2", ResourceVector(0, 1000, 0))
    with pytest.raises(errors.TargetGatewayFull):
        engine.roam(inst, "gw2", 0)
    # the app stays put but stops serving; its reservation is kept
    assert inst.status is InstanceStatus.STOPPED
    assert inst.host == "gw1"
    assert topo.node("gw1").allocated.mem == 64


def test_roam_same_gateway_is_noop(world):
    _, scheduler, engine = world
    inst = scheduler.install_iot_app(InstallRequest("dev1", "gw1", "agent"))
    record = engine.roam(inst, "gw1", 0)
    assert record.downtime_ms == 0
    assert inst.status is InstanceStatus.RUNNING
