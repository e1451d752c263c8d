"""Append-only run record: newline-delimited JSON envelopes with a gapless,
strictly increasing per-session sequence. Scripted sessions stamp events from
a logical clock so identical replays produce byte-identical records."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Iterable, Optional

EVENT_KINDS = frozenset(
    {
        "phase_change",
        "prompt",
        "response",
        "cb_instruction",
        "tool_invocation",
        "tool_result",
        "retry",
        "clarification_request",
        "clarification_answer",
        "report",
        "audit",
    }
)

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def logical_clock(seq: int) -> str:
    """Deterministic timestamp: epoch + seq seconds."""
    return (_EPOCH + timedelta(seconds=seq)).strftime("%Y-%m-%dT%H:%M:%SZ")


def wall_clock(seq: int) -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class EventEnvelope:
    seq: int
    kind: str
    at: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"seq": self.seq, "kind": self.kind, "at": self.at, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "EventEnvelope":
        d = json.loads(line)
        return cls(seq=d["seq"], kind=d["kind"], at=d["at"], payload=d["payload"])


class RunRecorder:
    """Per-session event log: in-memory list, optional NDJSON file, and a
    condition variable so live readers can tail appends."""

    def __init__(self, path: Optional[Path] = None, clock: Callable[[int], str] = logical_clock):
        self.path = path
        self.clock = clock
        self.events: list[EventEnvelope] = []
        self._lock = threading.Lock()
        self.changed = threading.Condition(self._lock)
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, kind: str, payload: dict) -> EventEnvelope:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        with self.changed:
            seq = len(self.events)
            envelope = EventEnvelope(seq, kind, self.clock(seq), payload)
            self.events.append(envelope)
            if self.path is not None:
                with self.path.open("a") as fh:
                    fh.write(envelope.to_json() + "\n")
            self.changed.notify_all()
        return envelope

    def snapshot(self) -> list[EventEnvelope]:
        with self._lock:
            return list(self.events)

    def since(self, seq: int) -> list[EventEnvelope]:
        """Events with seq strictly greater than the given value."""
        with self._lock:
            return list(self.events[seq + 1 :]) if seq >= -1 else list(self.events)

    @classmethod
    def load(cls, path: Path) -> "RunRecorder":
        recorder = cls(path=None)
        for line in path.read_text().splitlines():
            if line.strip():
                recorder.events.append(EventEnvelope.from_json(line))
        recorder.path = path
        return recorder


def render_record(events: Iterable[EventEnvelope]) -> str:
    return "".join(e.to_json() + "\n" for e in events)
