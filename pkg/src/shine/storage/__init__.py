"""Append-only event log, session records, export and replay."""

from shine.storage.events import EventType, LogEvent
from shine.storage.drivers import DocStoreDriver, MemoryDriver, StorageDriver, storage_from_env
from shine.storage.export import export_session, parse_jsonl
from shine.storage.replay import replay

__all__ = [
    "DocStoreDriver",
    "EventType",
    "LogEvent",
    "MemoryDriver",
    "StorageDriver",
    "export_session",
    "parse_jsonl",
    "replay",
    "storage_from_env",
]
