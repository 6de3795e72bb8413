"""Session log export: jsonl (one event object per line) and csv
(fixed columns with the payload flattened to one JSON string column)."""

from __future__ import annotations

import csv
import io
import json

from shine.storage.drivers import StorageDriver
from shine.storage.events import EventType, LogEvent

CSV_COLUMNS = ("sessionId", "seq", "tMs", "wallTime", "type", "payloadJson")


def export_session(storage: StorageDriver, session_id: str, fmt: str = "jsonl") -> bytes:
    """Serialize a session's full trace; raises UnknownSessionError via the driver."""
    events = storage.read_session(session_id)
    if fmt == "jsonl":
        return export_jsonl(events)
    if fmt == "csv":
        return export_csv(events)
    raise ValueError(f"unknown export format {fmt!r} (expected jsonl or csv)")


def export_jsonl(events: list[LogEvent]) -> bytes:
    return "".join(event.to_json_line() + "\n" for event in events).encode("utf-8")


def export_csv(events: list[LogEvent]) -> bytes:
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer)
    writer.writerow(CSV_COLUMNS)
    for event in events:
        writer.writerow(
            [
                event.session_id,
                event.seq,
                event.t_ms,
                event.wall_time,
                event.type.value,
                json.dumps(event.payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False),
            ]
        )
    return buffer.getvalue().encode("utf-8")


def parse_jsonl(data: bytes) -> list[LogEvent]:
    """Inverse of export_jsonl."""
    events = []
    for line in data.decode("utf-8").splitlines():
        if line.strip():
            events.append(LogEvent.from_json_obj(json.loads(line)))
    return events


def parse_csv(data: bytes) -> list[LogEvent]:
    """Inverse of export_csv."""
    reader = csv.reader(io.StringIO(data.decode("utf-8"), newline=""))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected csv header {header!r}")
    events = []
    for session_id, seq, t_ms, wall_time, type_, payload_json in reader:
        events.append(
            LogEvent(
                session_id=session_id,
                seq=int(seq),
                t_ms=int(t_ms),
                wall_time=wall_time,
                type=EventType(type_),
                payload=json.loads(payload_json),
            )
        )
    return events
