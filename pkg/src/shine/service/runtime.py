"""One session's live execution context.

A SessionRuntime owns the world, the explanation manager and the log seq
counter for exactly one session. Every public method takes the session
lock, so all mutations of one session are totally ordered; distinct
sessions run in parallel. Every state change produces exactly one log row,
and every server wire event carries the seq of the log row it reflects.
"""

from __future__ import annotations

import logging
import threading
from datetime import datetime, timedelta, timezone
from typing import Callable

from shine.errors import (
    ExplanationError,
    InteractionError,
    SessionLifecycleError,
    ShineError,
)
from shine.explain.engine import (
    BlockedInteractionCause,
    ExplanationCause,
    ExplanationInstance,
    ExplanationManager,
    RuleFiredCause,
    TriggerFiredCause,
    UserRequestCause,
    cause_to_json_obj,
)
from shine.explain.external import ExternalEngineClient
from shine.scenario.compiler import CompiledScenario
from shine.scenario.types import DeliveryMode
from shine.sim.types import (
    Blocked,
    CascadeTruncated,
    DirectWrite,
    Happening,
    RuleFiring,
    TaskChange,
    TaskStatus,
    TriggerFiring,
    deltas_of,
)
from shine.sim.world import init_world
from shine.storage.drivers import StorageDriver
from shine.storage.events import EventType, LogEvent
from shine.service.protocol import make_server_event

logger = logging.getLogger(__name__)

# Fixed epoch for deterministic wall times in headless runs.
HEADLESS_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)

_TASK_EVENT_TYPES = {
    TaskStatus.ACTIVE: EventType.TASK_STARTED,
    TaskStatus.COMPLETED: EventType.TASK_COMPLETED,
    TaskStatus.TIMED_OUT: EventType.TASK_TIMEOUT,
    TaskStatus.ABORTED: EventType.TASK_ABORTED,
}


def headless_wall_clock(t_ms: int) -> str:
    return (HEADLESS_EPOCH + timedelta(milliseconds=t_ms)).isoformat()


def live_wall_clock(t_ms: int) -> str:
    del t_ms
    return datetime.now(timezone.utc).isoformat()


class SessionRuntime:
    def __init__(
        self,
        session_id: str,
        scenario: CompiledScenario,
        storage: StorageDriver,
        participant_id: str = "anonymous",
        delivery_mode: DeliveryMode | None = None,
        context_vars: dict | None = None,
        user_context: dict | None = None,
        external_client: ExternalEngineClient | None = None,
        wall_clock: Callable[[int], str] = headless_wall_clock,
        clock_source: Callable[[], int] | None = None,
    ):
        self.session_id = session_id
        self.scenario = scenario
        self.storage = storage
        self.participant_id = participant_id
        self.delivery_mode = delivery_mode or scenario.spec.explanation_config.default_delivery_mode
        self.context_vars = dict(context_vars or {})
        self.user_context = dict(user_context or {})
        self.wall_clock = wall_clock
        self.clock_source = clock_source
        self.status = "active"
        self.created_wall = wall_clock(0)
        self.last_activity_wall_s: float | None = None  # set by the registry in live mode

        self._lock = threading.RLock()
        self._seq = 0
        self._sinks: list[Callable[[dict], None]] = []
        self._summary: dict | None = None
        self._counts = {
            "interactions": 0,
            "blocked": 0,
            "explanationsCreated": 0,
            "explanationsDelivered": 0,
            "queries": 0,
            "ratings": 0,
            "telemetry": 0,
        }

        if scenario.spec.explanation_config.engine_endpoint is not None and external_client is None:
            external_client = ExternalEngineClient(
                scenario.spec.explanation_config.engine_endpoint,
                scenario.spec.explanation_config.engine_timeout_ms,
            )
        self.explain = ExplanationManager(
            scenario, self.delivery_mode, session_id, external_client=external_client, user_context=self.user_context
        )
        # init_world validates the context overrides; callers see InteractionError
        self.world, self._init_happenings = init_world(scenario, self.context_vars)

    # -- plumbing -----------------------------------------------------------------

    def add_sink(self, sink: Callable[[dict], None]) -> None:
        """Register a push consumer (the WebSocket writer); events produced by
        any entry point are fanned out to every sink in order."""
        with self._lock:
            self._sinks.append(sink)

    def remove_sink(self, sink: Callable[[dict], None]) -> None:
        with self._lock:
            if sink in self._sinks:
                self._sinks.remove(sink)

    def _log(self, event_type: EventType, payload: dict, t_ms: int | None = None) -> LogEvent:
        self._seq += 1
        event = LogEvent(
            session_id=self.session_id,
            seq=self._seq,
            t_ms=self.world.clock_ms if t_ms is None else t_ms,
            wall_time=self.wall_clock(self.world.clock_ms if t_ms is None else t_ms),
            type=event_type,
            payload=payload,
        )
        self.storage.append(event)
        return event

    def _emit(self, events: list[dict]) -> list[dict]:
        for event in events:
            for sink in self._sinks:
                sink(event)
        return events

    def _server_event(self, event_type: str, log_seq: int, payload: dict) -> dict:
        return make_server_event(event_type, self.session_id, log_seq, payload)

    def _error_event(self, message: str, code: str = "bad_request", client_seq: int | None = None) -> dict:
        row = self._log(EventType.ERROR, {"code": code, "message": message, "clientSeq": client_seq})
        return self._server_event("error", row.seq, {"code": code, "message": message, "clientSeq": client_seq})

    def report_protocol_error(self, message: str) -> list[dict]:
        """Log and push an error event for a malformed client frame."""
        with self._lock:
            return self._emit([self._error_event(message, "protocol_violation")])

    # -- lifecycle ------------------------------------------------------------------

    def start(self) -> list[dict]:
        """Log SESSION_START and the time-zero happenings; returns the wire
        events a freshly connected client should see."""
        with self._lock:
            self._log(
                EventType.SESSION_START,
                {
                    "scenarioId": self.scenario.id,
                    "participantId": self.participant_id,
                    "deliveryMode": self.delivery_mode.value,
                    "contextVars": dict(self.context_vars),
                    "userContext": dict(self.user_context),
                },
            )
            events = self._process_happenings(self._init_happenings)
            self._init_happenings = []
            return self._emit(events)

    def complete(self) -> dict:
        """Finish the session; idempotent for already-completed sessions."""
        with self._lock:
            if self.status == "completed":
                return self._summary
            if self.status == "expired":
                raise SessionLifecycleError(f"session '{self.session_id}' has expired")
            self._sync_clock()
            summary = self._build_summary("completed")
            row = self._log(EventType.SESSION_END, {"reason": "completed", "summary": summary})
            self.status = "completed"
            self._summary = summary
            self._emit([self._server_event("session_end", row.seq, {"summary": summary})])
            return summary

    def expire(self) -> None:
        """Mark an abandoned session expired (registry sweep)."""
        with self._lock:
            if self.status != "active":
                return
            self._sync_clock()
            summary = self._build_summary("expired")
            row = self._log(EventType.SESSION_END, {"reason": "expired", "summary": summary})
            self.status = "expired"
            self._summary = summary
            self._emit([self._server_event("session_end", row.seq, {"summary": summary})])

    def _build_summary(self, reason: str) -> dict:
        return {
            "sessionId": self.session_id,
            "scenarioId": self.scenario.id,
            "participantId": self.participant_id,
            "reason": reason,
            "durationMs": self.world.clock_ms,
            "tasks": {task_id: state.to_json_obj() for task_id, state in self.world.task_states.items()},
            "counts": dict(self._counts),
        }

    def snapshot_payload(self) -> dict:
        """Current state for GET /state and reconnecting clients."""
        with self._lock:
            payload = self.world.snapshot().to_json_obj()
            payload["scenarioId"] = self.scenario.id
            payload["status"] = self.status
            payload["deliveryMode"] = self.delivery_mode.value
            payload["explanations"] = [
                instance.to_json_obj()
                for instance in self.explain.instances.values()
                if instance.delivered
            ]
            payload["logSeq"] = self._seq
            return payload

    # -- virtual clock -----------------------------------------------------------------

    def advance_virtual(self, to_ms: int) -> list[dict]:
        """Advance the session's virtual clock (scheduler tick or bot wait)."""
        with self._lock:
            if self.status != "active" or to_ms <= self.world.clock_ms:
                return []
            happenings = self.world.advance_clock(to_ms)
            return self._emit(self._process_happenings(happenings))

    def _sync_clock(self) -> None:
        """In live mode, catch the virtual clock up to elapsed wall time."""
        if self.clock_source is None:
            return
        now_ms = self.clock_source()
        if now_ms > self.world.clock_ms:
            happenings = self.world.advance_clock(now_ms)
            self._emit(self._process_happenings(happenings))

    # -- client events --------------------------------------------------------------------

    def handle_client_event(self, event: dict) -> list[dict]:
        """Dispatch one validated client frame; returns (and pushes) the
        resulting server events in causal order."""
        with self._lock:
            client_seq = event.get("seq")
            if self.status != "active":
                return self._emit([self._error_event(f"session is {self.status}", "session_closed", client_seq)])
            self._sync_clock()
            event_type = event["type"]
            payload = event["payload"]
            try:
                if event_type == "device_interaction":
                    out = self._on_device_interaction(payload, client_seq)
                elif event_type == "explanation_request":
                    out = self._on_explanation_request(payload)
                elif event_type == "explanation_query":
                    out = self._on_explanation_query(payload)
                elif event_type == "explanation_rating":
                    out = self._on_explanation_rating(payload)
                elif event_type == "client_telemetry":
                    out = self._on_client_telemetry(payload)
                else:
                    out = self._on_abort_task(payload)
            except (InteractionError, ExplanationError, ShineError) as exc:
                code = getattr(exc, "code", "bad_request")
                out = [self._error_event(str(exc), code, client_seq)]
            return self._emit(out)

    def _on_device_interaction(self, payload: dict, client_seq: int | None) -> list[dict]:
        device_id, prop, value = payload["deviceId"], payload["property"], payload["value"]
        event_id = self._seq + 1  # seq the DEVICE_INTERACTION row will get
        outcome = self.world.apply_interaction(device_id, prop, value, event_id)
        if isinstance(outcome, Blocked):
            self._counts["blocked"] += 1
            row = self._log(
                EventType.INTERACTION_BLOCKED,
                {
                    "deviceId": device_id,
                    "property": prop,
                    "value": value,
                    "ruleId": outcome.rule_id,
                    "explanationId": outcome.explanation_id,
                    "clientSeq": client_seq,
                },
            )
            events = [
                self._server_event(
                    "interaction_blocked",
                    row.seq,
                    {"deviceId": device_id, "property": prop, "value": value, "ruleId": outcome.rule_id},
                )
            ]
            cause = BlockedInteractionCause(outcome.rule_id, device_id, prop, value)
            self.explain.note_cause(cause)
            events.extend(self._explain_cause(cause))
            return events

        self._counts["interactions"] += 1
        row = self._log(
            EventType.DEVICE_INTERACTION,
            {"deviceId": device_id, "property": prop, "value": value, "clientSeq": client_seq},
        )
        assert row.seq == event_id
        return self._process_happenings(list(outcome.happenings), skip_direct_write=True)

    def _on_explanation_request(self, payload: dict) -> list[dict]:
        held = self.explain.release_held()
        if held is not None:
            self._log(EventType.EXPLANATION_REQUESTED, {"instanceId": held.instance_id, "matched": True})
            return self._deliver_now(held)
        cause = UserRequestCause(device_id=payload.get("deviceId"))
        spec = self.explain.select_explanation(cause)
        self._log(
            EventType.EXPLANATION_REQUESTED,
            {"deviceId": payload.get("deviceId"), "matched": spec is not None},
        )
        if spec is None:
            return []
        instance, fallback_reason = self.explain.create_instance(cause, spec, self.world.snapshot())
        events = self._log_created(instance, fallback_reason)
        events.extend(self._deliver_now(instance))
        return events

    def _on_explanation_query(self, payload: dict) -> list[dict]:
        parent_id = payload.get("parentInstanceId")
        parent = self.explain.instances.get(parent_id) if parent_id else self.explain.last_delivered
        if parent is None:
            return [self._error_event("no explanation to follow up on", "no_parent")]
        instance, matched = self.explain.handle_query(payload["text"], parent, self.world.snapshot())
        self._counts["queries"] += 1
        self._log(
            EventType.EXPLANATION_QUERY,
            {"text": payload["text"], "parentInstanceId": parent.instance_id, "matched": matched},
        )
        events = self._log_created(instance, None)
        events.extend(self._deliver_now(instance))
        return events

    def _on_explanation_rating(self, payload: dict) -> list[dict]:
        rating, revision = self.explain.record_rating(payload["instanceId"], payload["value"], self.world.clock_ms)
        self._counts["ratings"] += 1
        self._log(
            EventType.EXPLANATION_RATED,
            {"instanceId": rating.instance_id, "value": rating.value, "revision": revision},
        )
        return []

    def _on_client_telemetry(self, payload: dict) -> list[dict]:
        self._counts["telemetry"] += 1
        self._log(EventType.CLIENT_TELEMETRY, {"kind": payload["kind"], "data": payload.get("data", {})})
        return []

    def _on_abort_task(self, payload: dict) -> list[dict]:
        change = self.world.abort_task(payload["taskId"])
        return self._process_happenings([change])

    # -- happening processing ---------------------------------------------------------------

    def _process_happenings(self, happenings: list[Happening], *, skip_direct_write: bool = False) -> list[dict]:
        """Log every happening in causal order, then emit one state_update
        covering the deltas, task_update events, and the explanation
        pipeline for explanation-bearing causes."""
        events: list[dict] = []
        causes: list[ExplanationCause] = []
        task_rows: list[tuple[int, TaskChange]] = []
        last_state_seq = None
        for item in happenings:
            if isinstance(item, DirectWrite):
                if not skip_direct_write:
                    self._counts["interactions"] += 1
                    self._log(
                        EventType.DEVICE_INTERACTION,
                        {"deviceId": item.device_id, "property": item.prop, "value": item.value, "clientSeq": None},
                    )
                if item.delta is not None:
                    last_state_seq = self._seq
            elif isinstance(item, RuleFiring):
                row = self._log(
                    EventType.RULE_FIRED,
                    {
                        "ruleId": item.rule_id,
                        "depth": item.depth,
                        "deltas": [delta.to_json_obj() for delta in item.deltas],
                    },
                    t_ms=item.at_ms,
                )
                last_state_seq = row.seq
                cause = RuleFiredCause(item.rule_id)
                self.explain.note_cause(cause)
                if item.explanation_id is not None:
                    causes.append(cause)
            elif isinstance(item, TriggerFiring):
                row = self._log(
                    EventType.TRIGGER_FIRED,
                    {"triggerId": item.trigger_id, "deltas": [delta.to_json_obj() for delta in item.deltas]},
                    t_ms=item.at_ms,
                )
                last_state_seq = row.seq
                cause = TriggerFiredCause(item.trigger_id)
                self.explain.note_cause(cause)
                if item.explanation_id is not None:
                    causes.append(cause)
            elif isinstance(item, CascadeTruncated):
                self._log(EventType.CASCADE_TRUNCATED, {"depth": item.depth}, t_ms=item.at_ms)
            elif isinstance(item, TaskChange):
                row = self._log(
                    _TASK_EVENT_TYPES[item.new_status],
                    {"taskId": item.task_id, "from": item.old_status.value, "to": item.new_status.value},
                    t_ms=item.at_ms,
                )
                task_rows.append((row.seq, item))

        deltas = deltas_of(happenings)
        if deltas and last_state_seq is not None:
            events.append(
                self._server_event(
                    "state_update",
                    last_state_seq,
                    {"changes": [delta.to_json_obj() for delta in deltas], "clockMs": self.world.clock_ms},
                )
            )
        for seq, change in task_rows:
            state = self.world.task_states[change.task_id]
            events.append(
                self._server_event(
                    "task_update",
                    seq,
                    {"taskId": change.task_id, **state.to_json_obj()},
                )
            )
        for cause in causes:
            events.extend(self._explain_cause(cause))
        return events

    def _explain_cause(self, cause: ExplanationCause) -> list[dict]:
        """Create + deliver (or hold) the explanation attached to a cause."""
        spec = self.explain.select_explanation(cause)
        if spec is None:
            return []
        instance, fallback_reason = self.explain.create_instance(cause, spec, self.world.snapshot())
        events = self._log_created(instance, fallback_reason)
        decision = self.explain.deliver(instance, self.world.clock_ms)
        if decision.value == "send_now":
            events.extend(self._log_delivered(instance))
        elif self.scenario.spec.explanation_config.notify_on_pull:
            events.append(
                self._server_event("explanation_available", self._seq, {"instanceId": instance.instance_id})
            )
        return events

    def _log_created(self, instance: ExplanationInstance, fallback_reason: str | None) -> list[dict]:
        self._counts["explanationsCreated"] += 1
        if fallback_reason is not None:
            self._log(
                EventType.EXTERNAL_ENGINE_FALLBACK,
                {"instanceId": instance.instance_id, "reason": fallback_reason},
            )
        self._log(EventType.EXPLANATION_CREATED, instance.to_json_obj())
        return []

    def _deliver_now(self, instance: ExplanationInstance) -> list[dict]:
        if not instance.delivered:
            self.explain.mark_delivered(instance, self.world.clock_ms)
        return self._log_delivered(instance)

    def _log_delivered(self, instance: ExplanationInstance) -> list[dict]:
        self._counts["explanationsDelivered"] += 1
        row = self._log(EventType.EXPLANATION_DELIVERED, {"instanceId": instance.instance_id})
        return [
            self._server_event(
                "explanation",
                row.seq,
                {
                    "instanceId": instance.instance_id,
                    "specId": instance.spec_id,
                    "text": instance.text,
                    "mode": instance.mode.value,
                    "source": instance.source,
                    "cause": cause_to_json_obj(instance.cause),
                    "parentInstanceId": instance.parent_instance_id,
                    "interactive": instance.mode == DeliveryMode.INTERACTIVE,
                },
            )
        ]
