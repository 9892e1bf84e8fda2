"""Registry of application specs, device profiles and firmware versions.

Write-once at scenario load, read-only during a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import errors
from .topology import ResourceVector, Tier


class AppKind(str, Enum):
    IOT_APP = "IoTApp"
    DATA_APP = "DataApp"


def parse_version(version: str) -> tuple[int, ...]:
    """Parse a dotted numeric version; components compare numerically (1.10 > 1.9)."""
    try:
        parts = tuple(int(p) for p in version.split("."))
    except (ValueError, AttributeError):
        raise errors.ValidationError(f"unparseable firmware version: {version!r}") from None
    if not parts:
        raise errors.ValidationError("empty firmware version")
    return parts


@dataclass(frozen=True)
class AppSpec:
    """Catalog entry for either an IoT-App (gateway-pinned device agent) or a
    Data-App (edge/cloud analytics workload)."""

    app_id: str
    kind: AppKind
    demand: ResourceVector
    latency_requirement_ms: float | None = None
    aggregation_factor: float = 1.0
    state_size_mb: float = 0.0
    allowed_tiers: frozenset[Tier] = field(default=frozenset())

    def __post_init__(self):
        if not self.app_id:
            raise errors.ValidationError("app_id must be non-empty")
        if self.aggregation_factor < 1:
            raise errors.ValidationError(
                f"{self.app_id}: aggregation_factor must be >= 1")
        if self.state_size_mb < 0:
            raise errors.ValidationError(f"{self.app_id}: state_size must be >= 0")
        tiers = self.allowed_tiers
        if self.kind is AppKind.IOT_APP:
            if not tiers:
                tiers = frozenset({Tier.GATEWAY})
            if tiers != {Tier.GATEWAY}:
                raise errors.TierViolation(
                    f"{self.app_id}: IoT-Apps run only on gateways, got {sorted(t.value for t in tiers)}")
        else:
            if not tiers:
                tiers = frozenset({Tier.EDGE_MODULE, Tier.CENTRAL_CLOUD})
            if not tiers <= {Tier.EDGE_MODULE, Tier.CENTRAL_CLOUD}:
                raise errors.TierViolation(
                    f"{self.app_id}: Data-Apps run only on edge modules or the central cloud")
        object.__setattr__(self, "allowed_tiers", tiers)


@dataclass(frozen=True)
class DeviceProfile:
    model: str
    os_version: str
    protocol: str
    data_rate_kbps: float
    iot_app: str

    def __post_init__(self):
        if not self.model:
            raise errors.ValidationError("device model must be non-empty")
        if self.data_rate_kbps <= 0:
            raise errors.ValidationError(f"{self.model}: data_rate must be > 0")


@dataclass(frozen=True)
class FirmwareEntry:
    model: str
    os_version: str
    firmware_version: str

    def __post_init__(self):
        if not self.model or not self.os_version:
            raise errors.ValidationError("firmware model/os_version must be non-empty")
        parse_version(self.firmware_version)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.model, self.os_version, self.firmware_version)


class Catalog:
    """App specs keyed by app_id, device profiles keyed by model, firmware
    entries keyed by (model, os_version, version)."""

    def __init__(self):
        self.apps: dict[str, AppSpec] = {}
        self.profiles: dict[str, DeviceProfile] = {}
        self.firmware: dict[tuple[str, str, str], FirmwareEntry] = {}

    def register_app(self, spec: AppSpec) -> str:
        if spec.app_id in self.apps:
            raise errors.DuplicateAppId(spec.app_id)
        self.apps[spec.app_id] = spec
        return spec.app_id

    def app(self, app_id: str) -> AppSpec:
        try:
            return self.apps[app_id]
        except KeyError:
            raise errors.DanglingAppReference(app_id) from None

    def register_profile(self, profile: DeviceProfile) -> str:
        if profile.model in self.profiles:
            raise errors.ValidationError(f"duplicate device profile: {profile.model}")
        existing = self.apps.get(profile.iot_app)
        if existing is not None and existing.kind is not AppKind.IOT_APP:
            raise errors.TierViolation(
                f"profile {profile.model} must reference an IoT-App, "
                f"{profile.iot_app} is a {existing.kind.value}")
        self.profiles[profile.model] = profile
        return profile.model

    def profile(self, model: str) -> DeviceProfile:
        try:
            return self.profiles[model]
        except KeyError:
            raise errors.UnknownProfile(model) from None

    def register_firmware(self, entry: FirmwareEntry) -> None:
        if entry.key in self.firmware:
            raise errors.DuplicateFirmware(str(entry.key))
        self.firmware[entry.key] = entry

    def match_firmware(self, model: str, os_version: str) -> str:
        """Highest firmware version exactly matching (model, os_version)."""
        candidates = [e.firmware_version for e in self.firmware.values()
                      if e.model == model and e.os_version == os_version]
        if not candidates:
            raise errors.NoCompatibleFirmware(f"({model}, {os_version})")
        return max(candidates, key=parse_version)

    def resolve_iot_app(self, model: str) -> AppSpec:
        """The IoT-App spec managing devices of the given profile."""
        profile = self.profile(model)
        return self.app(profile.iot_app)
