"""Strict JSON parser for scenario documents.

Unknown fields are errors, not warnings: a typo in a study config must
surface before the study runs. Every error carries a dotted/indexed path
into the document. The parser enforces structural typing only; referential
and semantic invariants live in the validator.
"""

from __future__ import annotations

import json
from typing import Any

from shine.errors import ScenarioParseError
from shine.scenario.types import (
    COMPARISON_OPS,
    WIDGET_HINTS,
    ActionSpec,
    AfterEvent,
    And,
    AtTime,
    BlockSpec,
    Bounds,
    Comparison,
    ConditionExpr,
    ContextRef,
    DeliveryMode,
    DeviceRef,
    DeviceSpec,
    DoorSpec,
    EngineEndpoint,
    EnvironmentSet,
    ExplanationConfig,
    ExplanationSpec,
    FollowUpSpec,
    Literal,
    LiteralOperand,
    Not,
    Operand,
    Or,
    PropertySpec,
    RoomSpec,
    RuleSpec,
    ScenarioSpec,
    TaskSpec,
    TilePos,
    TriggerSpec,
    normalize_literal,
)

SCHEMA_VERSION = 1


def parse_scenario(data: bytes | str) -> ScenarioSpec:
    """Parse a UTF-8 scenario document into a ScenarioSpec.

    Raises ScenarioParseError on syntax errors (with position), type
    mismatches and unknown fields (with path).
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioParseError(f"document is not valid UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_scenario_obj(doc)


def parse_scenario_obj(doc: Any) -> ScenarioSpec:
    """Parse an already-decoded JSON object into a ScenarioSpec."""
    obj = _Obj(doc, "")
    version = obj.take_number("schemaVersion")
    if version != SCHEMA_VERSION:
        raise ScenarioParseError(f"unsupported schemaVersion {version!r} (expected {SCHEMA_VERSION})", "schemaVersion")
    spec = ScenarioSpec(
        id=obj.take_str("id"),
        name=obj.take_str("name"),
        rooms=tuple(obj.take_list("rooms", _parse_room)),
        devices=tuple(obj.take_list("devices", _parse_device, default=[])),
        rules=tuple(obj.take_list("rules", _parse_rule, default=[])),
        triggers=tuple(obj.take_list("triggers", _parse_trigger, default=[])),
        tasks=tuple(obj.take_list("tasks", _parse_task, default=[])),
        explanations=tuple(obj.take_list("explanations", _parse_explanation, default=[])),
        context_defaults=obj.take_literal_map("contextDefaults", default={}),
        explanation_config=obj.take_obj("explanationConfig", _parse_explanation_config, default=ExplanationConfig()),
    )
    obj.finish()
    return spec


class _Obj:
    """Cursor over one JSON object; tracks consumed keys so leftovers can be
    rejected with their path."""

    def __init__(self, raw: Any, path: str):
        if not isinstance(raw, dict):
            raise ScenarioParseError(f"expected an object, got {_type_name(raw)}", path or "<document>")
        self.raw = raw
        self.path = path
        self.seen: set[str] = set()

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def _get(self, key: str, required: bool) -> Any:
        self.seen.add(key)
        if key not in self.raw:
            if required:
                raise ScenarioParseError(f"missing required field '{key}'", self.path or "<document>")
            return _MISSING
        return self.raw[key]

    def take_str(self, key: str, *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING:
            return default
        if not isinstance(value, str):
            raise ScenarioParseError(f"expected string, got {_type_name(value)}", self._at(key))
        return value

    def take_opt_str(self, key: str) -> str | None:
        value = self._get(key, required=False)
        if value is _MISSING or value is None:
            return None
        if not isinstance(value, str):
            raise ScenarioParseError(f"expected string or null, got {_type_name(value)}", self._at(key))
        return value

    def take_bool(self, key: str, *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING:
            return default
        if not isinstance(value, bool):
            raise ScenarioParseError(f"expected boolean, got {_type_name(value)}", self._at(key))
        return value

    def take_number(self, key: str, *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING or value is None and not required:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioParseError(f"expected number, got {_type_name(value)}", self._at(key))
        return float(value)

    def take_int(self, key: str, *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING:
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioParseError(f"expected integer, got {_type_name(value)}", self._at(key))
        return value

    def take_literal(self, key: str, *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING or (value is None and not required):
            return default
        return _as_literal(value, self._at(key))

    def take_literal_map(self, key: str, *, default: Any = None) -> dict[str, Literal]:
        value = self._get(key, required=default is None)
        if value is _MISSING:
            return dict(default)
        if not isinstance(value, dict):
            raise ScenarioParseError(f"expected object, got {_type_name(value)}", self._at(key))
        return {name: _as_literal(item, f"{self._at(key)}.{name}") for name, item in value.items()}

    def take_list(self, key: str, item_parser, *, default: Any = None) -> list:
        value = self._get(key, required=default is None)
        if value is _MISSING:
            return list(default)
        if not isinstance(value, list):
            raise ScenarioParseError(f"expected array, got {_type_name(value)}", self._at(key))
        return [item_parser(item, f"{self._at(key)}[{i}]") for i, item in enumerate(value)]

    def take_obj(self, key: str, obj_parser, *, default: Any = None):
        value = self._get(key, required=default is None)
        if value is _MISSING:
            return default
        return obj_parser(value, self._at(key))

    def take_one_of(self, key: str, allowed: tuple[str, ...], *, required: bool = True, default: Any = None) -> Any:
        value = self._get(key, required)
        if value is _MISSING or (value is None and not required):
            return default
        if not isinstance(value, str) or value not in allowed:
            raise ScenarioParseError(
                f"expected one of {', '.join(allowed)}, got {value!r}", self._at(key)
            )
        return value

    def has(self, key: str) -> bool:
        return key in self.raw

    def finish(self) -> None:
        unknown = sorted(set(self.raw) - self.seen)
        if unknown:
            raise ScenarioParseError(f"unknown field '{unknown[0]}'", self._at(unknown[0]))


class _Missing:
    def __repr__(self) -> str:  # pragma: no cover
        return "<missing>"


_MISSING = _Missing()


def _type_name(value: Any) -> str:
    if value is None:
        return "null"
    return {bool: "boolean", int: "number", float: "number", str: "string", list: "array", dict: "object"}.get(
        type(value), type(value).__name__
    )


def _as_literal(value: Any, path: str) -> Literal:
    if value is None or isinstance(value, (dict, list)):
        raise ScenarioParseError(f"expected boolean, string or number, got {_type_name(value)}", path)
    return normalize_literal(value)


# --- per-type parsers --------------------------------------------------------


def _parse_tile(raw: Any, path: str) -> TilePos:
    obj = _Obj(raw, path)
    x = obj.take_int("x")
    y = obj.take_int("y")
    obj.finish()
    return TilePos(x=x, y=y)


def _parse_room(raw: Any, path: str) -> RoomSpec:
    obj = _Obj(raw, path)
    room_id = obj.take_str("id")
    bounds_obj = _Obj(obj._get("bounds", required=True), f"{path}.bounds")
    bounds = Bounds(
        x=bounds_obj.take_int("x"),
        y=bounds_obj.take_int("y"),
        width=bounds_obj.take_int("width"),
        height=bounds_obj.take_int("height"),
    )
    bounds_obj.finish()
    doors = obj.take_list("doors", _parse_door, default=[])
    obj.finish()
    return RoomSpec(id=room_id, bounds=bounds, doors=tuple(doors))


def _parse_door(raw: Any, path: str) -> DoorSpec:
    obj = _Obj(raw, path)
    spec = DoorSpec(to=obj.take_str("to"), position=obj.take_obj("position", _parse_tile))
    obj.finish()
    return spec


def _parse_property(raw: Any, path: str) -> PropertySpec:
    obj = _Obj(raw, path)
    name = obj.take_str("name")
    kind = obj.take_one_of("kind", ("boolean", "enumeration", "numeric"))
    values: tuple[str, ...] = ()
    vmin = vmax = step = None
    if kind == "enumeration":
        values = tuple(obj.take_list("values", _parse_enum_value))
    elif kind == "numeric":
        vmin = obj.take_number("min")
        vmax = obj.take_number("max")
        step = obj.take_number("step")
    initial = obj.take_literal("initial")
    expected = {"boolean": bool, "enumeration": str, "numeric": float}[kind]
    if not isinstance(initial, expected) or (expected is float and isinstance(initial, bool)):
        raise ScenarioParseError(
            f"initial value of a {kind} property must be a {expected.__name__}", f"{path}.initial"
        )
    spec = PropertySpec(
        name=name,
        kind=kind,
        initial=initial,
        user_writable=obj.take_bool("userWritable", default=True, required=False),
        widget_hint=obj.take_one_of("widgetHint", WIDGET_HINTS, required=False),
        values=values,
        min=vmin,
        max=vmax,
        step=step,
    )
    obj.finish()
    return spec


def _parse_enum_value(raw: Any, path: str) -> str:
    if not isinstance(raw, str):
        raise ScenarioParseError(f"expected string, got {_type_name(raw)}", path)
    return raw


def _parse_device(raw: Any, path: str) -> DeviceSpec:
    obj = _Obj(raw, path)
    spec = DeviceSpec(
        id=obj.take_str("id"),
        type=obj.take_str("type"),
        room_id=obj.take_str("roomId"),
        position=obj.take_obj("position", _parse_tile),
        properties=tuple(obj.take_list("properties", _parse_property)),
    )
    obj.finish()
    return spec


def _parse_operand(raw: Any, path: str) -> Operand:
    obj = _Obj(raw, path)
    if obj.has("device"):
        operand: Operand = DeviceRef(device_id=obj.take_str("device"), prop=obj.take_str("property"))
    elif obj.has("context"):
        operand = ContextRef(name=obj.take_str("context"))
    elif obj.has("value"):
        operand = LiteralOperand(value=obj.take_literal("value"))
    else:
        raise ScenarioParseError("operand needs 'device'+'property', 'context' or 'value'", path)
    obj.finish()
    return operand


def parse_condition(raw: Any, path: str) -> ConditionExpr:
    """Parse a condition expression tree (shared with bot goal overrides)."""
    obj = _Obj(raw, path)
    op = obj.take_str("op")
    if op in ("and", "or"):
        args = obj.take_list("args", parse_condition)
        obj.finish()
        if not args:
            raise ScenarioParseError(f"'{op}' needs at least one argument", f"{path}.args")
        return And(tuple(args)) if op == "and" else Or(tuple(args))
    if op == "not":
        arg = obj.take_obj("arg", parse_condition)
        obj.finish()
        return Not(arg)
    if op in COMPARISON_OPS:
        expr = Comparison(op=op, left=obj.take_obj("left", _parse_operand), right=obj.take_obj("right", _parse_operand))
        obj.finish()
        return expr
    raise ScenarioParseError(f"unknown condition operator {op!r}", f"{path}.op")


def _parse_action(raw: Any, path: str) -> ActionSpec:
    obj = _Obj(raw, path)
    spec = ActionSpec(device_id=obj.take_str("deviceId"), prop=obj.take_str("property"), value=obj.take_literal("value"))
    obj.finish()
    return spec


def _parse_block(raw: Any, path: str) -> BlockSpec:
    obj = _Obj(raw, path)
    value = obj.take_literal("value", required=False, default=None) if obj.has("value") else None
    spec = BlockSpec(device_id=obj.take_str("deviceId"), prop=obj.take_str("property"), value=value)
    obj.finish()
    return spec


def _parse_rule(raw: Any, path: str) -> RuleSpec:
    obj = _Obj(raw, path)
    rule_id = obj.take_str("id")
    kind = obj.take_one_of("kind", ("action", "constraint"))
    condition = obj.take_obj("condition", parse_condition)
    actions: list[ActionSpec] = []
    blocks: list[BlockSpec] = []
    if kind == "action":
        actions = obj.take_list("actions", _parse_action)
    else:
        blocks = obj.take_list("blocks", _parse_block)
    spec = RuleSpec(
        id=rule_id,
        kind=kind,
        condition=condition,
        actions=tuple(actions),
        blocks=tuple(blocks),
        explanation_id=obj.take_opt_str("explanationId"),
        priority=obj.take_int("priority", required=False, default=0),
    )
    obj.finish()
    return spec


def _parse_trigger_effect(raw: Any, path: str):
    obj = _Obj(raw, path)
    if obj.has("context"):
        effect = EnvironmentSet(name=obj.take_str("context"), value=obj.take_literal("value"))
        obj.finish()
        return effect
    if obj.has("deviceId"):
        return _parse_action(raw, path)
    raise ScenarioParseError("effect needs 'deviceId'+'property'+'value' or 'context'+'value'", path)


def _parse_trigger(raw: Any, path: str) -> TriggerSpec:
    obj = _Obj(raw, path)
    trigger_id = obj.take_str("id")
    if obj.has("at") == obj.has("afterEvent"):
        raise ScenarioParseError("trigger needs exactly one of 'at' or 'afterEvent'", path)
    if obj.has("at"):
        when = AtTime(seconds=obj.take_number("at"))
    else:
        ae = _Obj(obj._get("afterEvent", required=True), f"{path}.afterEvent")
        when = AfterEvent(
            event_type=ae.take_str("eventType"),
            device_id=ae.take_opt_str("deviceId"),
            delay_seconds=ae.take_number("delaySeconds"),
        )
        ae.finish()
    spec = TriggerSpec(
        id=trigger_id,
        when=when,
        effects=tuple(obj.take_list("effects", _parse_trigger_effect)),
        one_shot=obj.take_bool("oneShot", default=True, required=False),
        explanation_id=obj.take_opt_str("explanationId"),
    )
    obj.finish()
    return spec


def _parse_task(raw: Any, path: str) -> TaskSpec:
    obj = _Obj(raw, path)
    spec = TaskSpec(
        id=obj.take_str("id"),
        description=obj.take_str("description"),
        goal=obj.take_obj("goal", parse_condition),
        timeout_seconds=obj.take_number("timeoutSeconds", required=False),
        depends_on=obj.take_opt_str("dependsOn"),
        abortable=obj.take_bool("abortable", default=False, required=False),
    )
    obj.finish()
    return spec


def _parse_follow_up(raw: Any, path: str) -> FollowUpSpec:
    obj = _Obj(raw, path)
    spec = FollowUpSpec(
        keywords=tuple(obj.take_list("keywords", _parse_enum_value)),
        explanation_id=obj.take_str("explanationId"),
    )
    obj.finish()
    return spec


def _parse_explanation(raw: Any, path: str) -> ExplanationSpec:
    obj = _Obj(raw, path)
    spec = ExplanationSpec(
        id=obj.take_str("id"),
        template=obj.take_str("template"),
        follow_ups=tuple(obj.take_list("followUps", _parse_follow_up, default=[])),
        external=obj.take_bool("external", default=False, required=False),
    )
    obj.finish()
    return spec


def _parse_endpoint(raw: Any, path: str) -> EngineEndpoint:
    obj = _Obj(raw, path)
    spec = EngineEndpoint(url=obj.take_str("url"), transport=obj.take_one_of("transport", ("rest", "websocket")))
    obj.finish()
    return spec


def _parse_explanation_config(raw: Any, path: str) -> ExplanationConfig:
    obj = _Obj(raw, path)
    mode = obj.take_one_of("defaultDeliveryMode", tuple(m.value for m in DeliveryMode), required=False, default="push")
    config = ExplanationConfig(
        default_delivery_mode=DeliveryMode(mode),
        engine_endpoint=obj.take_obj("engineEndpoint", _parse_endpoint, default=None)
        if obj.has("engineEndpoint")
        else None,
        engine_timeout_ms=obj.take_int("engineTimeoutMs", required=False, default=2000),
        notify_on_pull=obj.take_bool("notifyOnPull", default=True, required=False),
    )
    obj.finish()
    return config


# --- serialization (round-trip inverse of the parser) -------------------------


def serialize_scenario(spec: ScenarioSpec, *, indent: int | None = 2) -> str:
    """Render a ScenarioSpec back to document JSON; reparsing yields an equal spec."""
    return json.dumps(scenario_to_json_obj(spec), indent=indent, ensure_ascii=False)


def scenario_to_json_obj(spec: ScenarioSpec) -> dict:
    return {
        "schemaVersion": SCHEMA_VERSION,
        "id": spec.id,
        "name": spec.name,
        "rooms": [_room_obj(room) for room in spec.rooms],
        "devices": [_device_obj(dev) for dev in spec.devices],
        "rules": [_rule_obj(rule) for rule in spec.rules],
        "triggers": [_trigger_obj(trig) for trig in spec.triggers],
        "tasks": [_task_obj(task) for task in spec.tasks],
        "explanations": [_explanation_obj(exp) for exp in spec.explanations],
        "contextDefaults": dict(spec.context_defaults),
        "explanationConfig": _config_obj(spec.explanation_config),
    }


def _tile_obj(pos: TilePos) -> dict:
    return {"x": pos.x, "y": pos.y}


def _room_obj(room: RoomSpec) -> dict:
    return {
        "id": room.id,
        "bounds": {"x": room.bounds.x, "y": room.bounds.y, "width": room.bounds.width, "height": room.bounds.height},
        "doors": [{"to": door.to, "position": _tile_obj(door.position)} for door in room.doors],
    }


def _property_obj(prop: PropertySpec) -> dict:
    obj: dict[str, Any] = {"name": prop.name, "kind": prop.kind, "initial": prop.initial, "userWritable": prop.user_writable}
    if prop.widget_hint is not None:
        obj["widgetHint"] = prop.widget_hint
    if prop.kind == "enumeration":
        obj["values"] = list(prop.values)
    elif prop.kind == "numeric":
        obj.update({"min": prop.min, "max": prop.max, "step": prop.step})
    return obj


def _device_obj(dev: DeviceSpec) -> dict:
    return {
        "id": dev.id,
        "type": dev.type,
        "roomId": dev.room_id,
        "position": _tile_obj(dev.position),
        "properties": [_property_obj(prop) for prop in dev.properties],
    }


def condition_to_json_obj(expr: ConditionExpr) -> dict:
    if isinstance(expr, And):
        return {"op": "and", "args": [condition_to_json_obj(item) for item in expr.args]}
    if isinstance(expr, Or):
        return {"op": "or", "args": [condition_to_json_obj(item) for item in expr.args]}
    if isinstance(expr, Not):
        return {"op": "not", "arg": condition_to_json_obj(expr.arg)}
    return {"op": expr.op, "left": _operand_obj(expr.left), "right": _operand_obj(expr.right)}


def _operand_obj(operand: Operand) -> dict:
    if isinstance(operand, DeviceRef):
        return {"device": operand.device_id, "property": operand.prop}
    if isinstance(operand, ContextRef):
        return {"context": operand.name}
    return {"value": operand.value}


def _action_obj(action: ActionSpec) -> dict:
    return {"deviceId": action.device_id, "property": action.prop, "value": action.value}


def _rule_obj(rule: RuleSpec) -> dict:
    obj: dict[str, Any] = {"id": rule.id, "kind": rule.kind, "condition": condition_to_json_obj(rule.condition)}
    if rule.kind == "action":
        obj["actions"] = [_action_obj(action) for action in rule.actions]
    else:
        obj["blocks"] = [
            {"deviceId": b.device_id, "property": b.prop, **({"value": b.value} if b.value is not None else {})}
            for b in rule.blocks
        ]
    if rule.explanation_id is not None:
        obj["explanationId"] = rule.explanation_id
    if rule.priority:
        obj["priority"] = rule.priority
    return obj


def _trigger_obj(trig: TriggerSpec) -> dict:
    obj: dict[str, Any] = {"id": trig.id}
    if isinstance(trig.when, AtTime):
        obj["at"] = trig.when.seconds
    else:
        ae: dict[str, Any] = {"eventType": trig.when.event_type, "delaySeconds": trig.when.delay_seconds}
        if trig.when.device_id is not None:
            ae["deviceId"] = trig.when.device_id
        obj["afterEvent"] = ae
    obj["effects"] = [
        _action_obj(effect) if isinstance(effect, ActionSpec) else {"context": effect.name, "value": effect.value}
        for effect in trig.effects
    ]
    obj["oneShot"] = trig.one_shot
    if trig.explanation_id is not None:
        obj["explanationId"] = trig.explanation_id
    return obj


def _task_obj(task: TaskSpec) -> dict:
    obj: dict[str, Any] = {"id": task.id, "description": task.description, "goal": condition_to_json_obj(task.goal)}
    if task.timeout_seconds is not None:
        obj["timeoutSeconds"] = task.timeout_seconds
    if task.depends_on is not None:
        obj["dependsOn"] = task.depends_on
    obj["abortable"] = task.abortable
    return obj


def _explanation_obj(exp: ExplanationSpec) -> dict:
    return {
        "id": exp.id,
        "template": exp.template,
        "followUps": [{"keywords": list(f.keywords), "explanationId": f.explanation_id} for f in exp.follow_ups],
        "external": exp.external,
    }


def _config_obj(config: ExplanationConfig) -> dict:
    obj: dict[str, Any] = {
        "defaultDeliveryMode": config.default_delivery_mode.value,
        "engineTimeoutMs": config.engine_timeout_ms,
        "notifyOnPull": config.notify_on_pull,
    }
    if config.engine_endpoint is not None:
        obj["engineEndpoint"] = {"url": config.engine_endpoint.url, "transport": config.engine_endpoint.transport}
    return obj
