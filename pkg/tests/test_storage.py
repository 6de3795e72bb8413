"""Storage drivers, sequence contract, export round-trips."""

from __future__ import annotations

import threading

import pytest

from shine.errors import SequenceConflictError, UnknownSessionError
from shine.storage.drivers import DocStoreDriver, MemoryDriver, storage_from_env
from shine.storage.events import EventType, LogEvent
from shine.storage.export import export_csv, export_jsonl, export_session, parse_csv, parse_jsonl

pytestmark = pytest.mark.unit


def event(session_id: str, seq: int, event_type=EventType.CLIENT_TELEMETRY, payload=None) -> LogEvent:
    return LogEvent(
        session_id=session_id,
        seq=seq,
        t_ms=seq * 10,
        wall_time=f"2026-01-01T00:00:{seq % 60:02d}+00:00",
        type=event_type,
        payload=payload or {"kind": "test", "n": seq},
    )


@pytest.fixture(params=["memory", "docstore"])
def driver(request, tmp_path):
    if request.param == "memory":
        return MemoryDriver()
    return DocStoreDriver(tmp_path / "store")


def test_first_event_must_have_seq_one(driver):
    with pytest.raises(SequenceConflictError):
        driver.append(event("s1", 2))
    assert driver.append(event("s1", 1)) == 1


def test_out_of_order_append_conflicts(driver):
    driver.append(event("s1", 1))
    with pytest.raises(SequenceConflictError):
        driver.append(event("s1", 3))
    with pytest.raises(SequenceConflictError):
        driver.append(event("s1", 1))


def test_sessions_are_independent_sequences(driver):
    driver.append(event("s1", 1))
    driver.append(event("s2", 1))
    driver.append(event("s1", 2))
    assert [e.seq for e in driver.read_session("s1")] == [1, 2]
    assert [e.seq for e in driver.read_session("s2")] == [1]


def test_unknown_session_read_raises(driver):
    with pytest.raises(UnknownSessionError):
        driver.read_session("ghost")


def test_session_records_roundtrip(driver):
    record = {"sessionId": "s1", "scenarioId": "demo", "status": "active"}
    driver.put_session(record)
    assert driver.get_session("s1") == record
    driver.put_session({**record, "status": "completed"})
    assert driver.get_session("s1")["status"] == "completed"
    assert driver.list_sessions(status="completed") == [{**record, "status": "completed"}]
    assert driver.list_sessions(status="active") == []
    assert driver.get_session("ghost") is None


def test_volume_10k_appends_read_back_in_order(driver):
    for i in range(1, 10_001):
        driver.append(event("big", i))
    events = driver.read_session("big")
    assert len(events) == 10_000
    assert [e.seq for e in events] == list(range(1, 10_001))


def test_parallel_appends_across_sessions(driver):
    def fill(session_id):
        for i in range(1, 201):
            driver.append(event(session_id, i))

    threads = [threading.Thread(target=fill, args=(f"s{n}",)) for n in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    for n in range(8):
        assert [e.seq for e in driver.read_session(f"s{n}")] == list(range(1, 201))


def test_docstore_recovers_seq_after_reopen(tmp_path):
    store = DocStoreDriver(tmp_path / "store")
    store.append(event("s1", 1))
    store.append(event("s1", 2))
    reopened = DocStoreDriver(tmp_path / "store")
    with pytest.raises(SequenceConflictError):
        reopened.append(event("s1", 2))
    reopened.append(event("s1", 3))
    assert len(reopened.read_session("s1")) == 3


def test_storage_from_env():
    assert isinstance(storage_from_env({"SHINE_STORAGE": "memory"}), MemoryDriver)
    with pytest.raises(ValueError):
        storage_from_env({"SHINE_STORAGE": "docstore"})
    with pytest.raises(ValueError):
        storage_from_env({"SHINE_STORAGE": "mongodb"})


def test_storage_from_env_docstore(tmp_path):
    driver = storage_from_env({"SHINE_STORAGE": "docstore", "SHINE_STORAGE_URL": f"file://{tmp_path}/db"})
    assert isinstance(driver, DocStoreDriver)


# --- export -------------------------------------------------------------------------


@pytest.fixture()
def filled() -> MemoryDriver:
    driver = MemoryDriver()
    driver.put_session({"sessionId": "s1", "scenarioId": "demo", "status": "active"})
    for i in range(1, 6):
        driver.append(event("s1", i))
    return driver


def test_jsonl_line_per_event(filled):
    data = export_session(filled, "s1", "jsonl")
    lines = data.decode("utf-8").splitlines()
    assert len(lines) == 5


def test_csv_line_count_is_events_plus_header(filled):
    data = export_session(filled, "s1", "csv")
    assert len(data.decode("utf-8").splitlines()) == 5 + 1


def test_jsonl_reparse_equals_stored(filled):
    stored = filled.read_session("s1")
    assert parse_jsonl(export_jsonl(stored)) == stored


def test_csv_reparse_equals_stored(filled):
    stored = filled.read_session("s1")
    assert parse_csv(export_csv(stored)) == stored


def test_export_is_fixed_point(filled):
    stored = filled.read_session("s1")
    once = export_jsonl(stored)
    assert export_jsonl(parse_jsonl(once)) == once
    once_csv = export_csv(stored)
    assert export_csv(parse_csv(once_csv)) == once_csv


def test_export_unknown_session(filled):
    with pytest.raises(UnknownSessionError):
        export_session(filled, "ghost", "jsonl")


def test_export_unknown_format(filled):
    with pytest.raises(ValueError):
        export_session(filled, "s1", "xml")
