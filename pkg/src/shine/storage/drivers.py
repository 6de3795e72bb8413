"""Storage drivers behind one document-store contract.

Two implementations: an in-memory driver for tests and headless runs, and a
durable file-backed document store (one events file and one record file per
session) selected via ``SHINE_STORAGE`` / ``SHINE_STORAGE_URL``. Appends for
one session arrive pre-serialized from its session executor; drivers only
need to tolerate parallel appends across sessions.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterable, Protocol

from shine.errors import SequenceConflictError, UnknownSessionError
from shine.storage.events import LogEvent


class StorageDriver(Protocol):
    def append(self, event: LogEvent) -> int:
        """Durably store one event; returns the acknowledged seq.

        Raises SequenceConflictError unless event.seq == last seq + 1 for its
        session (a conflict indicates a serialization bug upstream).
        """
        ...

    def read_session(self, session_id: str) -> list[LogEvent]:
        """All events of a session in seq order."""
        ...

    def put_session(self, record: dict) -> None:
        """Create or replace a session record (keyed by record['sessionId'])."""
        ...

    def get_session(self, session_id: str) -> dict | None:
        ...

    def list_sessions(self, *, scenario_id: str | None = None, status: str | None = None) -> list[dict]:
        ...


def _check_seq(last_seq: int, event: LogEvent) -> None:
    if event.seq != last_seq + 1:
        raise SequenceConflictError(
            f"session '{event.session_id}': expected seq {last_seq + 1}, got {event.seq}"
        )


def _match(record: dict, scenario_id: str | None, status: str | None) -> bool:
    if scenario_id is not None and record.get("scenarioId") != scenario_id:
        return False
    if status is not None and record.get("status") != status:
        return False
    return True


class MemoryDriver:
    """Behaviorally identical to the document store minus durability."""

    def __init__(self):
        self._events: dict[str, list[LogEvent]] = {}
        self._records: dict[str, dict] = {}
        self._lock = threading.Lock()

    def append(self, event: LogEvent) -> int:
        with self._lock:
            rows = self._events.setdefault(event.session_id, [])
            _check_seq(len(rows), event)
            rows.append(event)
        return event.seq

    def read_session(self, session_id: str) -> list[LogEvent]:
        with self._lock:
            if session_id not in self._events and session_id not in self._records:
                raise UnknownSessionError(f"unknown session '{session_id}'")
            return list(self._events.get(session_id, []))

    def put_session(self, record: dict) -> None:
        with self._lock:
            self._records[record["sessionId"]] = json.loads(json.dumps(record))

    def get_session(self, session_id: str) -> dict | None:
        with self._lock:
            record = self._records.get(session_id)
            return json.loads(json.dumps(record)) if record is not None else None

    def list_sessions(self, *, scenario_id: str | None = None, status: str | None = None) -> list[dict]:
        with self._lock:
            return [dict(r) for r in self._records.values() if _match(r, scenario_id, status)]


class DocStoreDriver:
    """File-backed document store: ``<dir>/<session>.events.jsonl`` plus
    ``<dir>/<session>.session.json``; appends fsync before acknowledging."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._last_seq: dict[str, int] = {}

    def _events_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.events.jsonl"

    def _record_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.session.json"

    def _recover_last_seq(self, session_id: str) -> int:
        path = self._events_path(session_id)
        if not path.exists():
            return 0
        last = 0
        with path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    last = json.loads(line)["seq"]
        return last

    def append(self, event: LogEvent) -> int:
        with self._lock:
            if event.session_id not in self._last_seq:
                self._last_seq[event.session_id] = self._recover_last_seq(event.session_id)
            _check_seq(self._last_seq[event.session_id], event)
            with self._events_path(event.session_id).open("a", encoding="utf-8") as handle:
                handle.write(event.to_json_line() + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self._last_seq[event.session_id] = event.seq
        return event.seq

    def read_session(self, session_id: str) -> list[LogEvent]:
        path = self._events_path(session_id)
        if not path.exists() and not self._record_path(session_id).exists():
            raise UnknownSessionError(f"unknown session '{session_id}'")
        events: list[LogEvent] = []
        if path.exists():
            with path.open("r", encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        events.append(LogEvent.from_json_obj(json.loads(line)))
        return events

    def put_session(self, record: dict) -> None:
        path = self._record_path(record["sessionId"])
        tmp = path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as handle:
            json.dump(record, handle, sort_keys=True)
            handle.flush()
            os.fsync(handle.fileno())
        tmp.replace(path)

    def get_session(self, session_id: str) -> dict | None:
        path = self._record_path(session_id)
        if not path.exists():
            return None
        with path.open("r", encoding="utf-8") as handle:
            return json.load(handle)

    def list_sessions(self, *, scenario_id: str | None = None, status: str | None = None) -> list[dict]:
        records = []
        for path in sorted(self.root.glob("*.session.json")):
            with path.open("r", encoding="utf-8") as handle:
                record = json.load(handle)
            if _match(record, scenario_id, status):
                records.append(record)
        return records


def storage_from_env(env: dict | None = None) -> StorageDriver:
    """Build the driver selected by SHINE_STORAGE (memory|docstore) and
    SHINE_STORAGE_URL (docstore directory)."""
    env = dict(os.environ if env is None else env)
    kind = env.get("SHINE_STORAGE", "memory")
    if kind == "memory":
        return MemoryDriver()
    if kind == "docstore":
        url = env.get("SHINE_STORAGE_URL", "")
        if not url:
            raise ValueError("SHINE_STORAGE=docstore requires SHINE_STORAGE_URL (a directory path)")
        if url.startswith("file://"):
            url = url[len("file://"):]
        return DocStoreDriver(url)
    raise ValueError(f"unknown SHINE_STORAGE value {kind!r} (expected memory or docstore)")


def iter_log_lines(events: Iterable[LogEvent]) -> Iterable[str]:
    for event in events:
        yield event.to_json_line()
