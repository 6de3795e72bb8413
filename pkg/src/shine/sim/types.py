"""Value types produced by the simulation core.

World operations return ordered lists of "happenings" (writes, rule firings,
trigger firings, task transitions) so that the session layer can log and
broadcast them in causal order without re-deriving causality.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Union

from shine.scenario.types import ContextRef, DeviceRef, Literal


class TaskStatus(str, Enum):
    LOCKED = "locked"
    ACTIVE = "active"
    COMPLETED = "completed"
    TIMED_OUT = "timedOut"
    ABORTED = "aborted"


TERMINAL_TASK_STATUSES = frozenset({TaskStatus.COMPLETED, TaskStatus.TIMED_OUT, TaskStatus.ABORTED})


@dataclass
class TaskState:
    status: TaskStatus
    started_at_ms: int | None = None
    ended_at_ms: int | None = None

    def to_json_obj(self) -> dict:
        return {"status": self.status.value, "startedAtMs": self.started_at_ms, "endedAtMs": self.ended_at_ms}


# --- mutation causes -----------------------------------------------------------


@dataclass(frozen=True)
class UserInteraction:
    session_event_id: int  # log seq of the DEVICE_INTERACTION event


@dataclass(frozen=True)
class RuleFired:
    rule_id: str
    depth: int  # cascade pass, 1-based


@dataclass(frozen=True)
class TriggerFired:
    trigger_id: str


@dataclass(frozen=True)
class SessionInit:
    pass


MutationCause = Union[UserInteraction, RuleFired, TriggerFired, SessionInit]


def cause_to_json_obj(cause: MutationCause) -> dict:
    if isinstance(cause, UserInteraction):
        return {"kind": "user", "eventId": cause.session_event_id}
    if isinstance(cause, RuleFired):
        return {"kind": "rule", "ruleId": cause.rule_id, "depth": cause.depth}
    if isinstance(cause, TriggerFired):
        return {"kind": "trigger", "triggerId": cause.trigger_id}
    return {"kind": "init"}


@dataclass(frozen=True)
class StateDelta:
    """One applied change; oldValue != newValue always holds."""

    target: DeviceRef | ContextRef
    old_value: Literal
    new_value: Literal
    cause: MutationCause

    def to_json_obj(self) -> dict:
        if isinstance(self.target, DeviceRef):
            target = {"device": self.target.device_id, "property": self.target.prop}
        else:
            target = {"context": self.target.name}
        return {"target": target, "from": self.old_value, "to": self.new_value, "cause": cause_to_json_obj(self.cause)}


# --- happenings -----------------------------------------------------------------


@dataclass(frozen=True)
class DirectWrite:
    """A committed user write; ``delta`` is None for idempotent no-ops."""

    device_id: str
    prop: str
    value: Literal
    delta: StateDelta | None
    event_id: int


@dataclass(frozen=True)
class RuleFiring:
    rule_id: str
    depth: int
    at_ms: int
    deltas: tuple[StateDelta, ...]
    explanation_id: str | None


@dataclass(frozen=True)
class TriggerFiring:
    trigger_id: str
    at_ms: int
    deltas: tuple[StateDelta, ...]
    explanation_id: str | None


@dataclass(frozen=True)
class CascadeTruncated:
    depth: int
    at_ms: int


@dataclass(frozen=True)
class TaskChange:
    task_id: str
    old_status: TaskStatus
    new_status: TaskStatus
    at_ms: int


Happening = Union[DirectWrite, RuleFiring, TriggerFiring, CascadeTruncated, TaskChange]


def deltas_of(happenings: list[Happening]) -> list[StateDelta]:
    """All state deltas in application order."""
    out: list[StateDelta] = []
    for item in happenings:
        if isinstance(item, DirectWrite):
            if item.delta is not None:
                out.append(item.delta)
        elif isinstance(item, (RuleFiring, TriggerFiring)):
            out.extend(item.deltas)
    return out


# --- interaction outcomes ---------------------------------------------------------


@dataclass(frozen=True)
class Committed:
    happenings: tuple[Happening, ...]

    @property
    def deltas(self) -> list[StateDelta]:
        return deltas_of(list(self.happenings))


@dataclass(frozen=True)
class Blocked:
    rule_id: str
    explanation_id: str | None


InteractionOutcome = Union[Committed, Blocked]


# --- snapshots --------------------------------------------------------------------


@dataclass(frozen=True)
class Snapshot:
    """Immutable, serializable copy of the observable world state."""

    device_values: dict[str, dict[str, Literal]]
    context: dict[str, Literal]
    clock_ms: int
    tasks: dict[str, dict]

    def to_json_obj(self) -> dict:
        return {
            "devices": {dev: dict(props) for dev, props in self.device_values.items()},
            "context": dict(self.context),
            "clockMs": self.clock_ms,
            "tasks": {task_id: dict(state) for task_id, state in self.tasks.items()},
        }

    def canonical_json(self) -> str:
        """Stable serialized form; equality of these strings is the
        bit-exactness criterion used by replay checks."""
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
