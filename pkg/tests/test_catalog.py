from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fogsim import errors
from fogsim.catalog import (AppKind, AppSpec, Catalog, DeviceProfile,
                            FirmwareEntry, parse_version)
from fogsim.topology import ResourceVector, Tier


def test_register_data_app(catalog):
    spec = catalog.app("analytics")
    assert spec.kind is AppKind.DATA_APP
    assert spec.latency_requirement_ms == 50
    assert spec.allowed_tiers == {Tier.EDGE_MODULE, Tier.CENTRAL_CLOUD}


def test_iot_app_defaults_to_gateway_tier(catalog):
    assert catalog.app("agent").allowed_tiers == {Tier.GATEWAY}


def test_iot_app_on_edge_is_tier_violation():
    with pytest.raises(errors.TierViolation):
        AppSpec("bad", AppKind.IOT_APP, ResourceVector(1, 1, 1),
                allowed_tiers=frozenset({Tier.EDGE_MODULE}))


def test_data_app_on_gateway_is_tier_violation():
    with pytest.raises(errors.TierViolation):
        AppSpec("bad", AppKind.DATA_APP, ResourceVector(1, 1, 1),
                allowed_tiers=frozenset({Tier.GATEWAY}))


def test_aggregation_factor_below_one_rejected():
    with pytest.raises(errors.ValidationError):
        AppSpec("bad", AppKind.DATA_APP, ResourceVector(1, 1, 1),
                aggregation_factor=0.5)


def test_duplicate_app_id(catalog):
    with pytest.raises(errors.DuplicateAppId):
        catalog.register_app(AppSpec("agent", AppKind.IOT_APP,
                                     ResourceVector(1, 1, 1)))


def test_register_firmware_and_duplicates(catalog):
    catalog.register_firmware(FirmwareEntry("m1", "os2", "1.4"))
    with pytest.raises(errors.DuplicateFirmware):
        catalog.register_firmware(FirmwareEntry("m1", "os2", "1.4"))
    with pytest.raises(errors.ValidationError):
        FirmwareEntry("", "os2", "1.0")


def test_match_firmware_picks_highest(catalog):
    assert catalog.match_firmware("smartband", "1.0") == "1.4"


def test_match_firmware_numeric_component_order():
    cat = Catalog()
    cat.register_firmware(FirmwareEntry("m", "os", "1.9"))
    cat.register_firmware(FirmwareEntry("m", "os", "1.10"))
    assert cat.match_firmware("m", "os") == "1.10"


def test_match_firmware_singleton():
    cat = Catalog()
    cat.register_firmware(FirmwareEntry("m1", "os2", "1.0"))
    assert cat.match_firmware("m1", "os2") == "1.0"


def test_match_firmware_unknown_model(catalog):
    with pytest.raises(errors.NoCompatibleFirmware):
        catalog.match_firmware("toaster", "1.0")


def test_unparseable_version_rejected():
    with pytest.raises(errors.ValidationError):
        parse_version("1.x")


def test_device_profile_validation():
    with pytest.raises(errors.ValidationError):
        DeviceProfile("m", "os", "BLE", 0, "agent")


def test_profile_must_reference_iot_app(catalog):
    with pytest.raises(errors.TierViolation):
        catalog.register_profile(
            DeviceProfile("cam", "2.0", "ZigBee", 10, "analytics"))


def test_resolve_iot_app(catalog):
    assert catalog.resolve_iot_app("smartband").app_id == "agent"


def test_resolve_unknown_profile(catalog):
    with pytest.raises(errors.UnknownProfile):
        catalog.resolve_iot_app("toaster")


def test_resolve_dangling_app_reference(catalog):
    del catalog.apps["agent"]
    with pytest.raises(errors.DanglingAppReference):
        catalog.resolve_iot_app("smartband")


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_match_firmware_equals_bruteforce_max(seed):
    rng = random.Random(seed)
    cat = Catalog()
    entries = []
    seen = set()
    for _ in range(rng.randint(1, 12)):
        version = ".".join(str(rng.randint(0, 12))
                           for _ in range(rng.randint(1, 3)))
        key = ("m", "os", version)
        if key in seen:
            continue
        seen.add(key)
        entries.append(version)
        cat.register_firmware(FirmwareEntry("m", "os", version))
    expected = max(entries, key=parse_version)
    assert parse_version(cat.match_firmware("m", "os")) == parse_version(expected)
