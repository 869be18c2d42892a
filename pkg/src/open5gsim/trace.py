"""Event trace records and the line-delimited trace file format.

One line per record, fixed field order:

    step_no time src dst channel kind digest(16 hex chars)

Digests are 64-bit FNV-1a over the canonical message bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import SimulationError

CHANNELS = ("OPEN5G", "SRB0", "SRB1", "SRB2", "NGAP", "NGU", "RADIO_DATA")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class TraceRecord:
    step_no: int
    time: int
    src: str
    dst: str
    channel: str
    kind: str
    digest: int

    def to_line(self) -> str:
        return f"{self.step_no} {self.time} {self.src} {self.dst} {self.channel} {self.kind} {self.digest:016x}"

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        parts = line.split()
        if len(parts) != 7:
            raise TraceParseError(f"expected 7 fields, got {len(parts)}")
        step_no, time = int(parts[0]), int(parts[1])
        channel = parts[4]
        if channel not in CHANNELS:
            raise TraceParseError(f"unknown channel {channel!r}")
        return cls(step_no, time, parts[2], parts[3], channel, parts[5], int(parts[6], 16))


class TraceParseError(SimulationError):
    pass


@dataclass
class EventTrace:
    records: list[TraceRecord]

    def to_text(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records)

    @classmethod
    def from_text(cls, text: str) -> "EventTrace":
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(TraceRecord.from_line(line))
            except (ValueError, TraceParseError) as exc:
                raise TraceParseError(f"line {lineno}: {exc}") from None
        return cls(records)

    def signature(self, channels: set[str] | None = None) -> list[tuple[str, str, str, str]]:
        """The comparable (src, dst, channel, kind) sequence."""
        return [
            (r.src, r.dst, r.channel, r.kind)
            for r in self.records
            if channels is None or r.channel in channels
        ]


def write_trace(path: str, trace: EventTrace) -> None:
    with open(path, "w") as fh:
        fh.write(trace.to_text())


def read_trace(path: str) -> EventTrace:
    with open(path) as fh:
        return EventTrace.from_text(fh.read())
