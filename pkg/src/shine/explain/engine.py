"""Per-session explanation bookkeeping.

Selects the explanation attached to a cause, renders its template against
the current snapshot, decides delivery per the session's mode (push and
interactive send immediately, pull holds until requested), matches
interactive follow-up queries by keyword overlap, and stores ratings with
revision history.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Union

from shine.errors import ExplanationError
from shine.explain.external import ExternalEngineClient
from shine.scenario.compiler import CompiledScenario
from shine.scenario.types import ActionSpec, DeliveryMode, ExplanationSpec, Literal
from shine.sim.types import Snapshot

UNMATCHED_QUERY_TEXT = "I have no further explanation for this."

_PLACEHOLDER = re.compile(r"\{\{\s*([^{}]*?)\s*\}\}")
_WORD = re.compile(r"[a-z0-9]+")


# --- causes -------------------------------------------------------------------


@dataclass(frozen=True)
class BlockedInteractionCause:
    rule_id: str
    device_id: str
    prop: str
    attempted_value: Literal


@dataclass(frozen=True)
class RuleFiredCause:
    rule_id: str


@dataclass(frozen=True)
class TriggerFiredCause:
    trigger_id: str


@dataclass(frozen=True)
class UserRequestCause:
    device_id: str | None = None


@dataclass(frozen=True)
class FollowUpQueryCause:
    parent_instance_id: str
    text: str


ExplanationCause = Union[
    BlockedInteractionCause, RuleFiredCause, TriggerFiredCause, UserRequestCause, FollowUpQueryCause
]


def cause_to_json_obj(cause: ExplanationCause) -> dict:
    if isinstance(cause, BlockedInteractionCause):
        return {
            "type": "blocked_interaction",
            "ruleId": cause.rule_id,
            "deviceId": cause.device_id,
            "property": cause.prop,
            "attemptedValue": cause.attempted_value,
        }
    if isinstance(cause, RuleFiredCause):
        return {"type": "rule_fired", "ruleId": cause.rule_id}
    if isinstance(cause, TriggerFiredCause):
        return {"type": "trigger_fired", "triggerId": cause.trigger_id}
    if isinstance(cause, UserRequestCause):
        return {"type": "user_request", "deviceId": cause.device_id}
    return {"type": "follow_up_query", "parentInstanceId": cause.parent_instance_id, "text": cause.text}


# --- instances -----------------------------------------------------------------


class DeliveryDecision(str, Enum):
    SEND_NOW = "send_now"
    HOLD = "hold"


@dataclass
class ExplanationInstance:
    instance_id: str
    spec_id: str  # explanation spec id, or "external" / "fallback"
    text: str
    mode: DeliveryMode
    cause: ExplanationCause
    created_at_ms: int
    source: str = "internal"  # internal | external | externalFallback
    delivered_at_ms: int | None = None
    parent_instance_id: str | None = None
    chain_spec_ids: tuple[str, ...] = ()
    decision: DeliveryDecision | None = None

    @property
    def delivered(self) -> bool:
        return self.delivered_at_ms is not None

    def to_json_obj(self) -> dict:
        return {
            "instanceId": self.instance_id,
            "specId": self.spec_id,
            "text": self.text,
            "mode": self.mode.value,
            "cause": cause_to_json_obj(self.cause),
            "createdAtMs": self.created_at_ms,
            "deliveredAtMs": self.delivered_at_ms,
            "source": self.source,
            "parentInstanceId": self.parent_instance_id,
        }


@dataclass(frozen=True)
class Rating:
    instance_id: str
    value: str  # "up" | "down"
    at_ms: int


# --- template rendering -----------------------------------------------------------


def render_template(spec: ExplanationSpec, snapshot: Snapshot, context: dict[str, Literal] | None = None) -> str:
    """Replace every placeholder with the canonically formatted current value.

    Device booleans render on/off (they describe switch-like properties);
    context booleans render true/false; numerics get trailing zeros trimmed.
    """
    values = context if context is not None else snapshot.context

    def substitute(match: re.Match) -> str:
        parts = match.group(1).split(".")
        if parts[0] == "device":
            value = snapshot.device_values[parts[1]][parts[2]]
            return _format_value(value, device_boolean=True)
        return _format_value(values[parts[1]], device_boolean=False)

    return _PLACEHOLDER.sub(substitute, spec.template)


def _format_value(value: Literal, *, device_boolean: bool) -> str:
    if isinstance(value, bool):
        if device_boolean:
            return "on" if value else "off"
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value):
            return str(int(value))
        return repr(value)
    return value


# --- the manager -----------------------------------------------------------------


@dataclass
class _CauseRecord:
    cause: ExplanationCause
    spec_id: str | None


class ExplanationManager:
    """Owns all explanation state of one session (same serialized context as
    the session's world)."""

    def __init__(
        self,
        scenario: CompiledScenario,
        mode: DeliveryMode,
        session_id: str,
        external_client: ExternalEngineClient | None = None,
        user_context: dict | None = None,
    ):
        self.scenario = scenario
        self.mode = mode
        self.session_id = session_id
        self.external_client = external_client
        self.user_context = dict(user_context or {})
        self.instances: dict[str, ExplanationInstance] = {}
        self.ratings: dict[str, Rating] = {}
        self._held: list[str] = []  # pull-mode instances awaiting a request
        self._last_delivered_id: str | None = None
        self._recent_by_device: dict[str, _CauseRecord] = {}
        self._recent_any: _CauseRecord | None = None
        self._counter = 0

    # -- selection ---------------------------------------------------------------

    def select_explanation(self, cause: ExplanationCause) -> ExplanationSpec | None:
        """The spec attached to the causing rule/trigger; user requests
        resolve to the most recent cause touching the named device."""
        spec_id = None
        if isinstance(cause, BlockedInteractionCause):
            rule = self.scenario.rules_by_id[cause.rule_id]
            spec_id = rule.rule.explanation_id
        elif isinstance(cause, RuleFiredCause):
            spec_id = self.scenario.rules_by_id[cause.rule_id].rule.explanation_id
        elif isinstance(cause, TriggerFiredCause):
            spec_id = self.scenario.triggers_by_id[cause.trigger_id].explanation_id
        elif isinstance(cause, UserRequestCause):
            record = (
                self._recent_by_device.get(cause.device_id) if cause.device_id is not None else self._recent_any
            )
            spec_id = record.spec_id if record is not None else None
        if spec_id is None:
            return None
        return self.scenario.explanations_by_id[spec_id]

    def note_cause(self, cause: ExplanationCause) -> None:
        """Record cause recency so later user requests can resolve it."""
        spec = self.select_explanation(cause)
        record = _CauseRecord(cause=cause, spec_id=spec.id if spec is not None else None)
        for device_id in self._devices_of(cause):
            self._recent_by_device[device_id] = record
        self._recent_any = record

    def _devices_of(self, cause: ExplanationCause) -> set[str]:
        if isinstance(cause, BlockedInteractionCause):
            return {cause.device_id}
        if isinstance(cause, RuleFiredCause):
            rule = self.scenario.rules_by_id[cause.rule_id].rule
            return {action.device_id for action in rule.actions}
        if isinstance(cause, TriggerFiredCause):
            trigger = self.scenario.triggers_by_id[cause.trigger_id]
            return {effect.device_id for effect in trigger.effects if isinstance(effect, ActionSpec)}
        return set()

    # -- creation and delivery -----------------------------------------------------

    def create_instance(
        self, cause: ExplanationCause, spec: ExplanationSpec, snapshot: Snapshot
    ) -> tuple[ExplanationInstance, str | None]:
        """Render an instance for a cause; consults the external engine when
        the spec demands it. Returns (instance, fallback_reason) where
        fallback_reason is None unless the engine degraded to the template.
        """
        source = "internal"
        fallback_reason = None
        text = render_template(spec, snapshot)
        if spec.external and self.external_client is not None:
            engine_text, failure = self.external_client.fetch(
                {
                    "sessionId": self.session_id,
                    "cause": cause_to_json_obj(cause),
                    "state": {
                        "devices": snapshot.device_values,
                        "context": snapshot.context,
                        "clockMs": snapshot.clock_ms,
                    },
                    "userContext": self.user_context,
                }
            )
            if engine_text:
                text = engine_text
                source = "external"
            else:
                source = "externalFallback"
                fallback_reason = failure or "empty_text"
        instance = self._new_instance(cause, spec.id, text, snapshot.clock_ms, source)
        return instance, fallback_reason

    def _new_instance(
        self,
        cause: ExplanationCause,
        spec_id: str,
        text: str,
        clock_ms: int,
        source: str = "internal",
        parent: ExplanationInstance | None = None,
    ) -> ExplanationInstance:
        self._counter += 1
        instance = ExplanationInstance(
            instance_id=f"exp-{self._counter}",
            spec_id=spec_id,
            text=text,
            mode=self.mode,
            cause=cause,
            created_at_ms=clock_ms,
            source=source,
            parent_instance_id=parent.instance_id if parent else None,
            chain_spec_ids=(parent.chain_spec_ids if parent else ()) + (spec_id,),
        )
        self.instances[instance.instance_id] = instance
        return instance

    def deliver(self, instance: ExplanationInstance, clock_ms: int, *, force: bool = False) -> DeliveryDecision:
        """Apply the session's delivery mode: push/interactive send now, pull
        holds until an explanation request releases it (``force`` sends
        regardless, used for instances created by an explicit request)."""
        if force or self.mode in (DeliveryMode.PUSH, DeliveryMode.INTERACTIVE):
            self.mark_delivered(instance, clock_ms)
            instance.decision = DeliveryDecision.SEND_NOW
        else:
            self._held.append(instance.instance_id)
            instance.decision = DeliveryDecision.HOLD
        return instance.decision

    def mark_delivered(self, instance: ExplanationInstance, clock_ms: int) -> None:
        instance.delivered_at_ms = clock_ms
        self._last_delivered_id = instance.instance_id

    def release_held(self) -> ExplanationInstance | None:
        """Pop the most recently held pull-mode instance, if any."""
        if not self._held:
            return None
        return self.instances[self._held.pop()]

    @property
    def held_count(self) -> int:
        return len(self._held)

    @property
    def last_delivered(self) -> ExplanationInstance | None:
        return self.instances.get(self._last_delivered_id) if self._last_delivered_id else None

    # -- interactive queries ---------------------------------------------------------

    def handle_query(
        self, text: str, parent: ExplanationInstance, snapshot: Snapshot
    ) -> tuple[ExplanationInstance, bool]:
        """Match a follow-up query against the parent spec's keyword sets.

        Highest overlap >= 1 wins (ties to the lowest list index); zero
        overlap yields the fixed fallback instance. Returns
        (instance, matched).
        """
        if self.mode != DeliveryMode.INTERACTIVE:
            raise ExplanationError("follow-up queries require interactive mode")
        parent_spec = self.scenario.explanations_by_id.get(parent.spec_id)
        words = set(_WORD.findall(text.lower()))
        best_index = -1
        best_score = 0
        if parent_spec is not None:
            for i, follow_up in enumerate(parent_spec.follow_ups):
                score = len(words & {keyword.lower() for keyword in follow_up.keywords})
                if score > best_score:
                    best_score = score
                    best_index = i
        cause = FollowUpQueryCause(parent_instance_id=parent.instance_id, text=text)
        if best_index < 0:
            instance = self._new_instance(cause, "fallback", UNMATCHED_QUERY_TEXT, snapshot.clock_ms, parent=parent)
            return instance, False
        spec = self.scenario.explanations_by_id[parent_spec.follow_ups[best_index].explanation_id]
        instance = self._new_instance(
            cause, spec.id, render_template(spec, snapshot), snapshot.clock_ms, parent=parent
        )
        return instance, True

    # -- ratings -----------------------------------------------------------------------

    def record_rating(self, instance_id: str, value: str, at_ms: int) -> tuple[Rating, bool]:
        """Store a thumb rating; returns (rating, is_revision). Later ratings
        overwrite the stored value; callers log each one."""
        if value not in ("up", "down"):
            raise ExplanationError(f"rating value must be 'up' or 'down', got {value!r}")
        instance = self.instances.get(instance_id)
        if instance is None:
            raise ExplanationError(f"unknown explanation instance '{instance_id}'")
        if not instance.delivered:
            raise ExplanationError(f"instance '{instance_id}' has not been delivered yet")
        revision = instance_id in self.ratings
        rating = Rating(instance_id=instance_id, value=value, at_ms=at_ms)
        self.ratings[instance_id] = rating
        return rating, revision
