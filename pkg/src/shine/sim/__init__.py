"""Per-session world state: interactions, rule cascades, triggers, tasks."""

from shine.sim.types import (
    Blocked,
    CascadeTruncated,
    Committed,
    DirectWrite,
    Happening,
    InteractionOutcome,
    MutationCause,
    RuleFired,
    RuleFiring,
    SessionInit,
    Snapshot,
    StateDelta,
    TaskChange,
    TaskState,
    TaskStatus,
    TriggerFired,
    TriggerFiring,
    UserInteraction,
)
from shine.sim.world import WorldState, init_world

__all__ = [
    "Blocked",
    "CascadeTruncated",
    "Committed",
    "DirectWrite",
    "Happening",
    "InteractionOutcome",
    "MutationCause",
    "RuleFired",
    "RuleFiring",
    "SessionInit",
    "Snapshot",
    "StateDelta",
    "TaskChange",
    "TaskState",
    "TaskStatus",
    "TriggerFired",
    "TriggerFiring",
    "UserInteraction",
    "WorldState",
    "init_world",
]
