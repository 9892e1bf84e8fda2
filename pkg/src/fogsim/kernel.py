"""Deterministic discrete-event engine: event queue, integer-ms clock, seeded
randomness, fault injection, and line-delimited trace emission.

The clock is an integer millisecond counter to avoid floating-point drift.
Events execute in (time, sequence) order; the sequence number breaks ties
FIFO, so two runs of the same scenario with the same seed produce
byte-identical traces.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import errors


class EventKind(str, Enum):
    ATTACH = "Attach"
    DETACH = "Detach"
    ROAM = "Roam"
    WORKLOAD_CHANGE = "WorkloadChange"
    SCHEDULER_TICK = "SchedulerTick"
    FLOW_ADVANCE = "FlowAdvance"
    FAULT_START = "FaultStart"
    FAULT_END = "FaultEnd"
    MIGRATION_COMPLETE = "MigrationComplete"
    CUSTOM = "Custom"


class FaultKind(str, Enum):
    LINK_DOWN = "LinkDown"
    NODE_DOWN = "NodeDown"
    CLOUD_PARTITION = "CloudPartition"


@dataclass(frozen=True)
class Fault:
    target: str  # link_id or node_id
    kind: FaultKind
    start: int
    duration: int

    def __post_init__(self):
        if self.duration <= 0:
            raise errors.ValidationError("fault duration must be > 0")


@dataclass(frozen=True)
class Event:
    time: int
    seq: int
    kind: EventKind
    payload: dict = field(default_factory=dict)


def _round_floats(value):
    if isinstance(value, float):
        return round(value, 9)
    if isinstance(value, dict):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


@dataclass(frozen=True)
class TraceRecord:
    time_ms: int
    seq: int
    kind: str
    subject: str
    details: dict

    def to_json(self) -> str:
        return json.dumps({
            "time_ms": self.time_ms,
            "seq": self.seq,
            "kind": self.kind,
            "subject": self.subject,
            "details": _round_floats(self.details),
        }, sort_keys=True, separators=(",", ":"))


class Trace:
    """Ordered record of a run; serializes to one JSON object per line."""

    def __init__(self, records: list[TraceRecord] | None = None):
        self.records: list[TraceRecord] = records or []

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self) -> str:
        return "".join(r.to_json() + "\n" for r in self.records)

    def hash(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        records = []
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(TraceRecord(obj["time_ms"], obj["seq"], obj["kind"],
                                           obj["subject"], obj["details"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise errors.MalformedTrace(f"line {i + 1}: {exc}") from None
        return cls(records)


class Kernel:
    def __init__(self, seed: int = 0):
        self.now: int = 0
        self.rng = random.Random(seed)
        self.trace = Trace()
        self.handlers: dict[EventKind, Callable[[Event], None]] = {}
        self._queue: list[tuple[int, int, Event]] = []
        self._event_seq = 0
        self._trace_seq = 0
        # set by the runtime; maps a fault target to True when it exists
        self.fault_target_exists: Callable[[Fault], bool] = lambda fault: True

    def register(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self.handlers[kind] = handler

    def schedule(self, time: int, kind: EventKind, payload: dict | None = None) -> Event:
        if time < self.now:
            raise errors.TimeInPast(f"{time} < {self.now}")
        self._event_seq += 1
        event = Event(int(time), self._event_seq, kind, payload or {})
        heapq.heappush(self._queue, (event.time, event.seq, event))
        return event

    def inject_fault(self, fault: Fault) -> None:
        """Schedule the start and end of a fault window."""
        if not self.fault_target_exists(fault):
            raise errors.UnknownTarget(fault.target)
        self.schedule(fault.start, EventKind.FAULT_START, {"fault": fault})
        self.schedule(fault.start + fault.duration, EventKind.FAULT_END,
                      {"fault": fault})

    def emit(self, kind: str, subject: str, details: dict | None = None) -> TraceRecord:
        # round at emission so the in-memory trace equals its JSON round-trip
        self._trace_seq += 1
        record = TraceRecord(self.now, self._trace_seq, kind, subject,
                             _round_floats(details or {}))
        self.trace.append(record)
        return record

    def run(self, until: int | None = None) -> Trace:
        """Execute queued events in (time, sequence) order until the queue is
        empty or the clock would pass `until`."""
        while self._queue:
            time, _, event = self._queue[0]
            if until is not None and time > until:
                break
            heapq.heappop(self._queue)
            self.now = time
            handler = self.handlers.get(event.kind)
            if handler is not None:
                handler(event)
        return self.trace
