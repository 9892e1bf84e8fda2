"""Gateway agent behavior: device attach/detach, firmware matching, and
install requests toward the orchestrator.

Discovery is event-driven: the scenario script injects attach/detach events
and roaming is an explicit detach followed by an attach at the new gateway.
Firmware lookup is recorded in the trace but costs no simulated time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from . import errors
from .catalog import Catalog
from .topology import Tier, Topology


class AttachmentStatus(str, Enum):
    ATTACHED = "Attached"
    DETACHED = "Detached"


@dataclass
class Attachment:
    device_id: str
    model: str
    os_version: str
    gateway: str
    attached_at: int
    status: AttachmentStatus = AttachmentStatus.ATTACHED


@dataclass(frozen=True)
class InstallRequest:
    """Request to deploy the managing IoT-App for a device onto its gateway."""

    device_id: str
    gateway: str
    app_id: str


@dataclass(frozen=True)
class DiscoveryOutcome:
    attachment: Attachment
    firmware_version: str | None
    install_request: InstallRequest | None


class DiscoveryService:
    def __init__(self, topology: Topology, catalog: Catalog):
        self.topology = topology
        self.catalog = catalog
        # device_id -> most recent Attachment (at most one Attached at a time)
        self.attachments: dict[str, Attachment] = {}

    def handle_attach(self, gateway: str, device_id: str, model: str,
                      os_version: str, time: int) -> DiscoveryOutcome:
        """Discover a device at a gateway.

        Creates the attachment, resolves the best-matching firmware, and emits
        an install request for the profile's IoT-App. Re-attaching at the same
        gateway is idempotent and emits no duplicate request. Attaching while
        attached elsewhere is an error: roaming detaches first.
        """
        node = self.topology.node(gateway)
        if node.tier is not Tier.GATEWAY:
            raise errors.NotAGateway(gateway)
        if model not in self.catalog.profiles:
            raise errors.UnknownDeviceProfile(model)
        profile = self.catalog.profiles[model]

        current = self.attachments.get(device_id)
        if current is not None and current.status is AttachmentStatus.ATTACHED:
            if current.gateway == gateway:
                return DiscoveryOutcome(current, self._lookup_firmware(model, os_version), None)
            raise errors.AlreadyAttachedElsewhere(
                f"{device_id} is attached at {current.gateway}")

        attachment = Attachment(device_id, model, os_version, gateway, time)
        self.attachments[device_id] = attachment
        firmware = self._lookup_firmware(model, os_version)
        request = InstallRequest(device_id, gateway, profile.iot_app)
        return DiscoveryOutcome(attachment, firmware, request)

    def handle_detach(self, gateway: str, device_id: str, time: int) -> Attachment:
        current = self.attachments.get(device_id)
        if (current is None or current.status is not AttachmentStatus.ATTACHED
                or current.gateway != gateway):
            raise errors.NotAttachedHere(f"{device_id} at {gateway}")
        current.status = AttachmentStatus.DETACHED
        return current

    def current_gateway(self, device_id: str) -> str | None:
        current = self.attachments.get(device_id)
        if current is not None and current.status is AttachmentStatus.ATTACHED:
            return current.gateway
        return None

    def _lookup_firmware(self, model: str, os_version: str) -> str | None:
        # Missing firmware does not block onboarding; the runtime traces a warning.
        try:
            return self.catalog.match_firmware(model, os_version)
        except errors.NoCompatibleFirmware:
            return None
