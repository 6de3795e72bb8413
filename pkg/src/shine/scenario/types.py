"""Declarative scenario configuration types.

A scenario document is UTF-8 JSON (extension ``.scenario.json``) with a
top-level ``"schemaVersion": 1``. These dataclasses are the parsed form;
they carry no behaviour beyond value normalization helpers. Structural
typing is enforced by the parser, referential and semantic invariants by
the validator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

# A literal value as it appears in documents and device state: JSON boolean,
# string, or number. All numbers are normalized to float at parse boundaries
# so that live runs and log replays agree bit-for-bit.
Literal = Union[bool, str, float]

COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
ORDERED_OPS = ("<", "<=", ">", ">=")

WIDGET_HINTS = ("toggle", "dropdown", "radio", "slider", "stepper")


def normalize_literal(value: bool | str | int | float) -> Literal:
    """Map a JSON scalar onto the canonical literal domain (ints become floats)."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    return value


def literal_kind(value: Literal) -> str:
    """Kind tag of a literal: ``boolean``, ``numeric`` or ``string``."""
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, float):
        return "numeric"
    return "string"


class DeliveryMode(str, Enum):
    PUSH = "push"
    PULL = "pull"
    INTERACTIVE = "interactive"


# --- condition expressions ---------------------------------------------------


@dataclass(frozen=True)
class DeviceRef:
    device_id: str
    prop: str


@dataclass(frozen=True)
class ContextRef:
    name: str


@dataclass(frozen=True)
class LiteralOperand:
    value: Literal


Operand = Union[DeviceRef, ContextRef, LiteralOperand]


@dataclass(frozen=True)
class Comparison:
    op: str  # one of COMPARISON_OPS
    left: Operand
    right: Operand


@dataclass(frozen=True)
class And:
    args: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Not:
    arg: "ConditionExpr"


ConditionExpr = Union[Comparison, And, Or, Not]


# --- geometry ----------------------------------------------------------------


@dataclass(frozen=True)
class TilePos:
    x: int
    y: int


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle in integer tile units; tiles span
    ``[x, x+width) x [y, y+height)``."""

    x: int
    y: int
    width: int
    height: int

    def contains(self, pos: TilePos) -> bool:
        return self.x <= pos.x < self.x + self.width and self.y <= pos.y < self.y + self.height

    def on_boundary(self, pos: TilePos) -> bool:
        """True when ``pos`` is a tile of this room lying on its outer ring."""
        if not self.contains(pos):
            return False
        return (
            pos.x == self.x
            or pos.x == self.x + self.width - 1
            or pos.y == self.y
            or pos.y == self.y + self.height - 1
        )


@dataclass(frozen=True)
class DoorSpec:
    to: str  # target room id
    position: TilePos  # boundary tile of the owning room


@dataclass(frozen=True)
class RoomSpec:
    id: str
    bounds: Bounds
    doors: tuple[DoorSpec, ...] = ()


# --- devices -----------------------------------------------------------------


@dataclass(frozen=True)
class PropertySpec:
    """One interactive or sensor attribute of a device.

    ``kind`` is ``boolean``, ``enumeration`` (with ``values``) or ``numeric``
    (with ``min``/``max``/``step``). ``widget_hint`` feeds the client's
    control-panel generator; absent means the per-kind default.
    """

    name: str
    kind: str
    initial: Literal
    user_writable: bool = True
    widget_hint: str | None = None
    values: tuple[str, ...] = ()  # enumeration only
    min: float | None = None  # numeric only
    max: float | None = None
    step: float | None = None

    def in_domain(self, value: Literal) -> bool:
        """Whether ``value`` lies in this property's declared domain."""
        if self.kind == "boolean":
            return isinstance(value, bool)
        if self.kind == "enumeration":
            return isinstance(value, str) and value in self.values
        if not isinstance(value, float) or isinstance(value, bool):
            return False
        if self.min is None or self.max is None or self.step is None:
            return False
        if not (self.min <= value <= self.max):
            return False
        steps = (value - self.min) / self.step
        return abs(steps - round(steps)) < 1e-9

    def value_kind(self) -> str:
        """Comparison kind of values: enumerations compare as strings."""
        if self.kind == "enumeration":
            return "string"
        return self.kind


@dataclass(frozen=True)
class DeviceSpec:
    id: str
    type: str
    room_id: str
    position: TilePos
    properties: tuple[PropertySpec, ...]

    def property(self, name: str) -> PropertySpec | None:
        for prop in self.properties:
            if prop.name == name:
                return prop
        return None


# --- rules, triggers, tasks --------------------------------------------------


@dataclass(frozen=True)
class ActionSpec:
    device_id: str
    prop: str
    value: Literal


@dataclass(frozen=True)
class BlockSpec:
    """Constraint target: a (device, property) write to veto, optionally only
    for one specific attempted value."""

    device_id: str
    prop: str
    value: Literal | None = None

    def covers(self, device_id: str, prop: str, value: Literal) -> bool:
        if self.device_id != device_id or self.prop != prop:
            return False
        return self.value is None or self.value == value


@dataclass(frozen=True)
class RuleSpec:
    id: str
    kind: str  # "action" | "constraint"
    condition: ConditionExpr
    actions: tuple[ActionSpec, ...] = ()
    blocks: tuple[BlockSpec, ...] = ()
    explanation_id: str | None = None
    priority: int = 0  # ties broken by document order


@dataclass(frozen=True)
class AtTime:
    seconds: float


@dataclass(frozen=True)
class AfterEvent:
    event_type: str
    delay_seconds: float
    device_id: str | None = None


TriggerWhen = Union[AtTime, AfterEvent]


@dataclass(frozen=True)
class EnvironmentSet:
    name: str
    value: Literal


TriggerEffect = Union[ActionSpec, EnvironmentSet]


@dataclass(frozen=True)
class TriggerSpec:
    id: str
    when: TriggerWhen
    effects: tuple[TriggerEffect, ...]
    one_shot: bool = True
    explanation_id: str | None = None


@dataclass(frozen=True)
class TaskSpec:
    id: str
    description: str
    goal: ConditionExpr
    timeout_seconds: float | None = None
    depends_on: str | None = None
    abortable: bool = False


# --- explanations ------------------------------------------------------------


@dataclass(frozen=True)
class FollowUpSpec:
    keywords: tuple[str, ...]
    explanation_id: str


@dataclass(frozen=True)
class ExplanationSpec:
    """Template with ``{{device.<id>.<prop>}}`` / ``{{context.<name>}}``
    placeholders. When ``external`` is set the template is the fallback text
    used when the configured engine fails or times out."""

    id: str
    template: str
    follow_ups: tuple[FollowUpSpec, ...] = ()
    external: bool = False


@dataclass(frozen=True)
class EngineEndpoint:
    url: str
    transport: str  # "rest" | "websocket"


@dataclass(frozen=True)
class ExplanationConfig:
    default_delivery_mode: DeliveryMode = DeliveryMode.PUSH
    engine_endpoint: EngineEndpoint | None = None
    engine_timeout_ms: int = 2000
    notify_on_pull: bool = True  # emit "explanation available" notices in pull mode


# --- the document root -------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    name: str
    rooms: tuple[RoomSpec, ...]
    devices: tuple[DeviceSpec, ...] = ()
    rules: tuple[RuleSpec, ...] = ()
    triggers: tuple[TriggerSpec, ...] = ()
    tasks: tuple[TaskSpec, ...] = ()
    explanations: tuple[ExplanationSpec, ...] = ()
    context_defaults: dict[str, Literal] = field(default_factory=dict)
    explanation_config: ExplanationConfig = field(default_factory=ExplanationConfig)

    def device(self, device_id: str) -> DeviceSpec | None:
        for dev in self.devices:
            if dev.id == device_id:
                return dev
        return None


# --- validation reports ------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def to_json_obj(self) -> dict:
        return {"severity": self.severity, "path": self.path, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...]

    @property
    def ok(self) -> bool:
        return not any(issue.severity == "error" for issue in self.issues)

    def errors(self) -> list[ValidationIssue]:
        return [issue for issue in self.issues if issue.severity == "error"]

    def to_json_obj(self) -> dict:
        return {"ok": self.ok, "issues": [issue.to_json_obj() for issue in self.issues]}
