"""Event-sourced replay: rebuild a session's final world state from its log.

Replay re-drives the simulation from the logged inputs only (session
context, virtual-clock timestamps, device interactions, aborts); rule and
trigger effects are re-derived by the simulation core itself. Used as the
correctness oracle for the live pipeline.
"""

from __future__ import annotations

from shine.errors import ReplayError
from shine.scenario.compiler import CompiledScenario
from shine.sim.types import Blocked, Committed, Snapshot
from shine.sim.world import init_world
from shine.storage.events import EventType, LogEvent


def replay(scenario: CompiledScenario, events: list[LogEvent]) -> Snapshot:
    """Re-run a complete session prefix; returns the resulting snapshot.

    Raises ReplayError for malformed prefixes (seq gaps, missing
    SESSION_START, scenario mismatch) and for logs that diverge from what
    the simulation does (an interaction that does not commit/block the way
    it was logged).
    """
    if not events:
        raise ReplayError("empty event log")
    for i, event in enumerate(events):
        if event.seq != i + 1:
            raise ReplayError(f"seq gap: expected {i + 1}, got {event.seq}")
    first = events[0]
    if first.type != EventType.SESSION_START:
        raise ReplayError(f"log must start with SESSION_START, got {first.type.value}")
    if first.payload.get("scenarioId") != scenario.id:
        raise ReplayError(
            f"scenario mismatch: log is for '{first.payload.get('scenarioId')}', got '{scenario.id}'"
        )

    world, _ = init_world(scenario, first.payload.get("contextVars", {}))
    for event in events[1:]:
        world.advance_clock(event.t_ms)
        if event.type == EventType.DEVICE_INTERACTION:
            outcome = world.apply_interaction(
                event.payload["deviceId"], event.payload["property"], event.payload["value"], event.seq
            )
            if not isinstance(outcome, Committed):
                raise ReplayError(f"seq {event.seq}: logged interaction no longer commits")
        elif event.type == EventType.INTERACTION_BLOCKED:
            outcome = world.apply_interaction(
                event.payload["deviceId"], event.payload["property"], event.payload["value"], event.seq
            )
            if not isinstance(outcome, Blocked):
                raise ReplayError(f"seq {event.seq}: logged blocked interaction now commits")
        elif event.type == EventType.TASK_ABORTED:
            world.abort_task(event.payload["taskId"])
    return world.snapshot()
