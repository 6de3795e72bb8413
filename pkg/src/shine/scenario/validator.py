"""Referential and semantic validation of parsed scenarios.

Produces a ValidationReport rather than raising: researchers get every
problem in one pass, each with a path into the document. The report is pure:
the same spec always yields the same report.
"""

from __future__ import annotations

import re
from urllib.parse import urlparse

from shine.errors import ConditionTypeError
from shine.scenario.compiler import compile_condition
from shine.scenario.types import (
    ActionSpec,
    AfterEvent,
    And,
    AtTime,
    ConditionExpr,
    DeviceRef,
    EnvironmentSet,
    LiteralOperand,
    Not,
    Or,
    ScenarioSpec,
    ValidationIssue,
    ValidationReport,
    literal_kind,
)

# Occurrence types an afterEvent trigger may react to.
TRIGGER_EVENT_TYPES = (
    "DEVICE_INTERACTION",
    "INTERACTION_BLOCKED",
    "RULE_FIRED",
    "TRIGGER_FIRED",
    "TASK_COMPLETED",
)

_PLACEHOLDER = re.compile(r"\{\{\s*([^{}]*?)\s*\}\}")


def validate_scenario(spec: ScenarioSpec) -> ValidationReport:
    """Check every invariant of every scenario element; ok iff no errors."""
    v = _Validator(spec)
    v.check_rooms()
    v.check_devices()
    v.check_rules()
    v.check_triggers()
    v.check_tasks()
    v.check_explanations()
    v.check_config()
    return ValidationReport(issues=tuple(v.issues))


class _Validator:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.issues: list[ValidationIssue] = []

    def error(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(severity="error", path=path, message=message))

    def warning(self, path: str, message: str) -> None:
        self.issues.append(ValidationIssue(severity="warning", path=path, message=message))

    def _check_unique(self, items, category: str) -> None:
        seen: set[str] = set()
        for i, item in enumerate(items):
            if item.id in seen:
                self.error(f"{category}[{i}].id", f"duplicate {category.rstrip('s')} id '{item.id}'")
            seen.add(item.id)

    # -- rooms ---------------------------------------------------------------

    def check_rooms(self) -> None:
        spec = self.spec
        if not spec.rooms:
            self.error("rooms", "a scenario needs at least one room")
            return
        self._check_unique(spec.rooms, "rooms")
        room_ids = {room.id for room in spec.rooms}
        for i, room in enumerate(spec.rooms):
            if room.bounds.width < 1 or room.bounds.height < 1:
                self.error(f"rooms[{i}].bounds", f"degenerate bounds {room.bounds.width}x{room.bounds.height}")
                continue
            for j, door in enumerate(room.doors):
                if door.to not in room_ids:
                    self.error(f"rooms[{i}].doors[{j}].to", f"unknown room '{door.to}'")
                elif door.to == room.id:
                    self.warning(f"rooms[{i}].doors[{j}].to", "door leads back into its own room")
                if not room.bounds.on_boundary(door.position):
                    self.error(
                        f"rooms[{i}].doors[{j}].position",
                        f"door tile ({door.position.x},{door.position.y}) is not on the boundary of room '{room.id}'",
                    )
        self._check_door_graph()

    def _check_door_graph(self) -> None:
        """The undirected door graph must connect all rooms."""
        rooms = self.spec.rooms
        if len(rooms) < 2:
            return
        adjacency: dict[str, set[str]] = {room.id: set() for room in rooms}
        for room in rooms:
            for door in room.doors:
                if door.to in adjacency:
                    adjacency[room.id].add(door.to)
                    adjacency[door.to].add(room.id)
        start = rooms[0].id
        reached = {start}
        frontier = [start]
        while frontier:
            current = frontier.pop()
            for neighbor in adjacency[current]:
                if neighbor not in reached:
                    reached.add(neighbor)
                    frontier.append(neighbor)
        unreachable = sorted(set(adjacency) - reached)
        if unreachable:
            self.error("rooms", f"door graph disconnected: no path from '{start}' to {', '.join(unreachable)}")

    # -- devices ---------------------------------------------------------------

    def check_devices(self) -> None:
        spec = self.spec
        self._check_unique(spec.devices, "devices")
        rooms = {room.id: room for room in spec.rooms}
        for i, dev in enumerate(spec.devices):
            room = rooms.get(dev.room_id)
            if room is None:
                self.error(f"devices[{i}].roomId", f"unknown room '{dev.room_id}'")
            elif not room.bounds.contains(dev.position):
                self.error(
                    f"devices[{i}].position",
                    f"tile ({dev.position.x},{dev.position.y}) lies outside room '{dev.room_id}'",
                )
            names: set[str] = set()
            for j, prop in enumerate(dev.properties):
                path = f"devices[{i}].properties[{j}]"
                if prop.name in names:
                    self.error(f"{path}.name", f"duplicate property name '{prop.name}'")
                names.add(prop.name)
                self._check_property(prop, path)

    def _check_property(self, prop, path: str) -> None:
        if prop.kind == "numeric":
            if prop.min >= prop.max:
                self.error(path, f"numeric range requires min < max (got {prop.min} >= {prop.max})")
                return
            if prop.step <= 0:
                self.error(f"{path}.step", f"step must be positive (got {prop.step})")
                return
            steps = (prop.max - prop.min) / prop.step
            if abs(steps - round(steps)) > 1e-9:
                self.error(path, f"range ({prop.min}..{prop.max}) is not an integer multiple of step {prop.step}")
        elif prop.kind == "enumeration":
            if len(set(prop.values)) < 2:
                self.error(f"{path}.values", "enumeration needs at least 2 distinct values")
        if not prop.in_domain(prop.initial):
            self.error(f"{path}.initial", f"initial value {prop.initial!r} is outside the {prop.kind} domain")

    # -- rules -----------------------------------------------------------------

    def check_rules(self) -> None:
        spec = self.spec
        self._check_unique(spec.rules, "rules")
        for i, rule in enumerate(spec.rules):
            base = f"rules[{i}]"
            self._check_condition(rule.condition, f"{base}.condition")
            if rule.kind == "action":
                if not rule.actions:
                    self.error(f"{base}.actions", "action rule needs at least one action")
                for j, action in enumerate(rule.actions):
                    self._check_action(action, f"{base}.actions[{j}]")
            else:
                if not rule.blocks:
                    self.error(f"{base}.blocks", "constraint rule needs at least one block entry")
                for j, block in enumerate(rule.blocks):
                    prop = self._resolve_property(block.device_id, block.prop, f"{base}.blocks[{j}]")
                    if prop is not None and block.value is not None and not prop.in_domain(block.value):
                        self.error(f"{base}.blocks[{j}].value", f"blocked value {block.value!r} is outside the property domain")
            self._check_explanation_ref(rule.explanation_id, f"{base}.explanationId")

    def _check_action(self, action: ActionSpec, path: str) -> None:
        prop = self._resolve_property(action.device_id, action.prop, path)
        if prop is not None and not prop.in_domain(action.value):
            self.error(f"{path}.value", f"value {action.value!r} is outside the domain of '{action.device_id}.{action.prop}'")

    def _resolve_property(self, device_id: str, prop_name: str, path: str):
        device = self.spec.device(device_id)
        if device is None:
            self.error(path, f"unknown device '{device_id}'")
            return None
        prop = device.property(prop_name)
        if prop is None:
            self.error(path, f"device '{device_id}' has no property '{prop_name}'")
        return prop

    def _check_condition(self, condition: ConditionExpr, path: str) -> None:
        try:
            compile_condition(condition, self.spec, path)
        except ConditionTypeError as exc:
            self.error(exc.path or path, exc.message)
            return
        self._warn_dead_enum_comparisons(condition, path)

    def _warn_dead_enum_comparisons(self, expr: ConditionExpr, path: str) -> None:
        """Flag equality tests against strings a device enumeration can never hold."""
        if isinstance(expr, (And, Or)):
            for i, arg in enumerate(expr.args):
                self._warn_dead_enum_comparisons(arg, f"{path}.args[{i}]")
            return
        if isinstance(expr, Not):
            self._warn_dead_enum_comparisons(expr.arg, f"{path}.arg")
            return
        pairs = ((expr.left, expr.right), (expr.right, expr.left))
        for ref, other in pairs:
            if not isinstance(ref, DeviceRef) or not isinstance(other, LiteralOperand):
                continue
            device = self.spec.device(ref.device_id)
            prop = device.property(ref.prop) if device else None
            if (
                prop is not None
                and prop.kind == "enumeration"
                and isinstance(other.value, str)
                and other.value not in prop.values
            ):
                self.warning(path, f"'{other.value}' is not among the values of '{ref.device_id}.{ref.prop}'; comparison can never hold")

    # -- triggers ----------------------------------------------------------------

    def check_triggers(self) -> None:
        spec = self.spec
        self._check_unique(spec.triggers, "triggers")
        for i, trig in enumerate(spec.triggers):
            base = f"triggers[{i}]"
            if isinstance(trig.when, AtTime):
                if trig.when.seconds < 0:
                    self.error(f"{base}.at", f"time must be >= 0 (got {trig.when.seconds})")
            else:
                when: AfterEvent = trig.when
                if when.delay_seconds < 0:
                    self.error(f"{base}.afterEvent.delaySeconds", f"delay must be >= 0 (got {when.delay_seconds})")
                if when.event_type not in TRIGGER_EVENT_TYPES:
                    self.error(
                        f"{base}.afterEvent.eventType",
                        f"unknown event type '{when.event_type}' (expected one of {', '.join(TRIGGER_EVENT_TYPES)})",
                    )
                if when.device_id is not None and self.spec.device(when.device_id) is None:
                    self.error(f"{base}.afterEvent.deviceId", f"unknown device '{when.device_id}'")
            if not trig.effects:
                self.error(f"{base}.effects", "trigger needs at least one effect")
            for j, effect in enumerate(trig.effects):
                if isinstance(effect, ActionSpec):
                    self._check_action(effect, f"{base}.effects[{j}]")
                else:
                    self._check_environment_set(effect, f"{base}.effects[{j}]")
            self._check_explanation_ref(trig.explanation_id, f"{base}.explanationId")

    def _check_environment_set(self, effect: EnvironmentSet, path: str) -> None:
        default = self.spec.context_defaults.get(effect.name)
        if default is None:
            self.error(path, f"unknown context variable '{effect.name}'")
            return
        if literal_kind(effect.value) != literal_kind(default):
            self.error(
                f"{path}.value",
                f"context variable '{effect.name}' is {literal_kind(default)}, got {literal_kind(effect.value)}",
            )

    # -- tasks ---------------------------------------------------------------------

    def check_tasks(self) -> None:
        spec = self.spec
        self._check_unique(spec.tasks, "tasks")
        task_ids = {task.id for task in spec.tasks}
        for i, task in enumerate(spec.tasks):
            base = f"tasks[{i}]"
            self._check_condition(task.goal, f"{base}.goal")
            if task.timeout_seconds is not None and task.timeout_seconds <= 0:
                self.error(f"{base}.timeoutSeconds", f"timeout must be positive (got {task.timeout_seconds})")
            if task.depends_on is not None and task.depends_on not in task_ids:
                self.error(f"{base}.dependsOn", f"unknown task '{task.depends_on}'")
        self._check_task_cycles()

    def _check_task_cycles(self) -> None:
        parents = {task.id: task.depends_on for task in self.spec.tasks}
        for i, task in enumerate(self.spec.tasks):
            seen = {task.id}
            cursor = parents.get(task.id)
            while cursor is not None and cursor in parents:
                if cursor in seen:
                    self.error(f"tasks[{i}].dependsOn", f"dependency cycle through '{task.id}'")
                    break
                seen.add(cursor)
                cursor = parents[cursor]

    # -- explanations ----------------------------------------------------------------

    def check_explanations(self) -> None:
        spec = self.spec
        self._check_unique(spec.explanations, "explanations")
        ids = {exp.id for exp in spec.explanations}
        for i, exp in enumerate(spec.explanations):
            base = f"explanations[{i}]"
            self._check_template(exp.template, f"{base}.template")
            for j, follow in enumerate(exp.follow_ups):
                if follow.explanation_id not in ids:
                    self.error(f"{base}.followUps[{j}].explanationId", f"unknown explanation '{follow.explanation_id}'")
                if not follow.keywords:
                    self.warning(f"{base}.followUps[{j}].keywords", "empty keyword list can never match a query")
        self._check_follow_up_cycles()

    def _check_template(self, template: str, path: str) -> None:
        for match in _PLACEHOLDER.finditer(template):
            inner = match.group(1)
            parts = inner.split(".")
            if parts[0] == "device" and len(parts) == 3:
                device = self.spec.device(parts[1])
                if device is None:
                    self.error(path, f"placeholder '{{{{{inner}}}}}' references unknown device '{parts[1]}'")
                elif device.property(parts[2]) is None:
                    self.error(path, f"placeholder '{{{{{inner}}}}}' references unknown property '{parts[2]}' of '{parts[1]}'")
            elif parts[0] == "context" and len(parts) == 2:
                if parts[1] not in self.spec.context_defaults:
                    self.error(path, f"placeholder '{{{{{inner}}}}}' references unknown context variable '{parts[1]}'")
            else:
                self.error(path, f"malformed placeholder '{{{{{inner}}}}}' (expected device.<id>.<prop> or context.<name>)")

    def _check_follow_up_cycles(self) -> None:
        graph = {exp.id: [f.explanation_id for f in exp.follow_ups] for exp in self.spec.explanations}
        for i, exp in enumerate(self.spec.explanations):
            # DFS from each node; a walk that returns to its origin is a cycle
            stack = list(graph.get(exp.id, ()))
            seen: set[str] = set()
            while stack:
                current = stack.pop()
                if current == exp.id:
                    self.error(f"explanations[{i}].followUps", f"follow-up cycle reachable from '{exp.id}'")
                    break
                if current in seen or current not in graph:
                    continue
                seen.add(current)
                stack.extend(graph[current])

    def _check_explanation_ref(self, explanation_id: str | None, path: str) -> None:
        if explanation_id is not None and explanation_id not in {exp.id for exp in self.spec.explanations}:
            self.error(path, f"unknown explanation '{explanation_id}'")

    # -- config -----------------------------------------------------------------------

    def check_config(self) -> None:
        config = self.spec.explanation_config
        if config.engine_timeout_ms <= 0:
            self.error("explanationConfig.engineTimeoutMs", f"timeout must be positive (got {config.engine_timeout_ms})")
        endpoint = config.engine_endpoint
        if endpoint is not None:
            parsed = urlparse(endpoint.url)
            expected = ("http", "https") if endpoint.transport == "rest" else ("ws", "wss")
            if parsed.scheme not in expected or not parsed.netloc:
                self.error(
                    "explanationConfig.engineEndpoint.url",
                    f"malformed {endpoint.transport} URL '{endpoint.url}' (expected scheme {' or '.join(expected)})",
                )
