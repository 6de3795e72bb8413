"""Log event records: the append-only, per-session behavioral trace."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum


class EventType(str, Enum):
    SESSION_START = "SESSION_START"
    SESSION_END = "SESSION_END"
    DEVICE_INTERACTION = "DEVICE_INTERACTION"
    INTERACTION_BLOCKED = "INTERACTION_BLOCKED"
    RULE_FIRED = "RULE_FIRED"
    TRIGGER_FIRED = "TRIGGER_FIRED"
    TASK_STARTED = "TASK_STARTED"
    TASK_COMPLETED = "TASK_COMPLETED"
    TASK_TIMEOUT = "TASK_TIMEOUT"
    TASK_ABORTED = "TASK_ABORTED"
    EXPLANATION_CREATED = "EXPLANATION_CREATED"
    EXPLANATION_DELIVERED = "EXPLANATION_DELIVERED"
    EXPLANATION_REQUESTED = "EXPLANATION_REQUESTED"
    EXPLANATION_QUERY = "EXPLANATION_QUERY"
    EXPLANATION_RATED = "EXPLANATION_RATED"
    EXTERNAL_ENGINE_FALLBACK = "EXTERNAL_ENGINE_FALLBACK"
    CASCADE_TRUNCATED = "CASCADE_TRUNCATED"
    CLIENT_TELEMETRY = "CLIENT_TELEMETRY"
    ERROR = "ERROR"


@dataclass(frozen=True)
class LogEvent:
    """One row of a session's trace.

    ``seq`` is gapless from 1 per session; ``t_ms`` is the session's virtual
    clock and never decreases within a session; ``wall_time`` is an ISO-8601
    UTC timestamp (deterministic in headless runs).
    """

    session_id: str
    seq: int
    t_ms: int
    wall_time: str
    type: EventType
    payload: dict

    def to_json_obj(self) -> dict:
        return {
            "sessionId": self.session_id,
            "seq": self.seq,
            "tMs": self.t_ms,
            "wallTime": self.wall_time,
            "type": self.type.value,
            "payload": self.payload,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "LogEvent":
        return cls(
            session_id=obj["sessionId"],
            seq=obj["seq"],
            t_ms=obj["tMs"],
            wall_time=obj["wallTime"],
            type=EventType(obj["type"]),
            payload=obj["payload"],
        )
