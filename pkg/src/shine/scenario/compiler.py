"""Condition kind-checking and indexed compilation of validated scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from shine.errors import CompileError, ConditionTypeError
from shine.scenario.types import (
    ORDERED_OPS,
    ExplanationSpec,
    RoomSpec,
    AfterEvent,
    And,
    AtTime,
    ConditionExpr,
    ContextRef,
    DeviceRef,
    DeviceSpec,
    Literal,
    Not,
    Operand,
    Or,
    RuleSpec,
    ScenarioSpec,
    TaskSpec,
    TriggerSpec,
    literal_kind,
)


@dataclass(frozen=True)
class CheckedCondition:
    """A condition whose references resolved and whose comparisons kind-check.

    ``device_refs`` and ``context_refs`` list every reference the expression
    reads; the rule engine uses them to decide which rules a state change can
    affect.
    """

    expr: ConditionExpr
    device_refs: frozenset[tuple[str, str]]
    context_refs: frozenset[str]

    def evaluate(self, device_values: Mapping[tuple[str, str], Literal], context: Mapping[str, Literal]) -> bool:
        return _eval(self.expr, device_values, context)


def compile_condition(expr: ConditionExpr, spec: ScenarioSpec, path: str = "condition") -> CheckedCondition:
    """Resolve and kind-check a condition against a scenario.

    Raises ConditionTypeError on unresolved references or kind mismatches
    (e.g. an ordered comparison over booleans).
    """
    device_refs: set[tuple[str, str]] = set()
    context_refs: set[str] = set()
    _check(expr, spec, path, device_refs, context_refs)
    return CheckedCondition(expr=expr, device_refs=frozenset(device_refs), context_refs=frozenset(context_refs))


def _check(
    expr: ConditionExpr,
    spec: ScenarioSpec,
    path: str,
    device_refs: set[tuple[str, str]],
    context_refs: set[str],
) -> None:
    if isinstance(expr, (And, Or)):
        for i, arg in enumerate(expr.args):
            _check(arg, spec, f"{path}.args[{i}]", device_refs, context_refs)
        return
    if isinstance(expr, Not):
        _check(expr.arg, spec, f"{path}.arg", device_refs, context_refs)
        return
    left_kind = _operand_kind(expr.left, spec, f"{path}.left", device_refs, context_refs)
    right_kind = _operand_kind(expr.right, spec, f"{path}.right", device_refs, context_refs)
    if expr.op in ORDERED_OPS:
        if left_kind != "numeric" or right_kind != "numeric":
            raise ConditionTypeError(
                f"ordered comparison '{expr.op}' requires numeric operands, got {left_kind} and {right_kind}", path
            )
    elif left_kind != right_kind:
        raise ConditionTypeError(f"cannot compare {left_kind} with {right_kind}", path)


def _operand_kind(
    operand: Operand,
    spec: ScenarioSpec,
    path: str,
    device_refs: set[tuple[str, str]],
    context_refs: set[str],
) -> str:
    if isinstance(operand, DeviceRef):
        device = spec.device(operand.device_id)
        if device is None:
            raise ConditionTypeError(f"unknown device '{operand.device_id}'", path)
        prop = device.property(operand.prop)
        if prop is None:
            raise ConditionTypeError(f"device '{operand.device_id}' has no property '{operand.prop}'", path)
        device_refs.add((operand.device_id, operand.prop))
        return prop.value_kind()
    if isinstance(operand, ContextRef):
        if operand.name not in spec.context_defaults:
            raise ConditionTypeError(f"unknown context variable '{operand.name}'", path)
        context_refs.add(operand.name)
        return literal_kind(spec.context_defaults[operand.name])
    return literal_kind(operand.value)


def _eval(expr: ConditionExpr, device_values: Mapping[tuple[str, str], Literal], context: Mapping[str, Literal]) -> bool:
    if isinstance(expr, And):
        return all(_eval(arg, device_values, context) for arg in expr.args)
    if isinstance(expr, Or):
        return any(_eval(arg, device_values, context) for arg in expr.args)
    if isinstance(expr, Not):
        return not _eval(expr.arg, device_values, context)
    left = _operand_value(expr.left, device_values, context)
    right = _operand_value(expr.right, device_values, context)
    if expr.op == "==":
        return left == right
    if expr.op == "!=":
        return left != right
    if expr.op == "<":
        return left < right
    if expr.op == "<=":
        return left <= right
    if expr.op == ">":
        return left > right
    return left >= right


def _operand_value(
    operand: Operand, device_values: Mapping[tuple[str, str], Literal], context: Mapping[str, Literal]
) -> Literal:
    if isinstance(operand, DeviceRef):
        return device_values[(operand.device_id, operand.prop)]
    if isinstance(operand, ContextRef):
        return context[operand.name]
    return operand.value


# --- compiled scenarios --------------------------------------------------------


@dataclass(frozen=True)
class CompiledRule:
    rule: RuleSpec
    condition: CheckedCondition
    order: int  # position after (priority, document order) sorting


@dataclass(frozen=True)
class CompiledTask:
    task: TaskSpec
    goal: CheckedCondition


@dataclass(frozen=True)
class CompiledScenario:
    """A validated scenario plus the lookup structure the simulation core uses."""

    spec: ScenarioSpec
    rooms_by_id: dict[str, RoomSpec] = field(default_factory=dict)
    devices_by_id: dict[str, DeviceSpec] = field(default_factory=dict)
    rules_by_id: dict[str, CompiledRule] = field(default_factory=dict)
    triggers_by_id: dict[str, TriggerSpec] = field(default_factory=dict)
    tasks_by_id: dict[str, CompiledTask] = field(default_factory=dict)
    explanations_by_id: dict[str, ExplanationSpec] = field(default_factory=dict)
    action_rules: tuple[CompiledRule, ...] = ()
    constraint_rules: tuple[CompiledRule, ...] = ()
    constraints_by_target: dict[tuple[str, str], tuple[CompiledRule, ...]] = field(default_factory=dict)
    at_time_triggers: tuple[TriggerSpec, ...] = ()  # sorted by (deadline, document order)
    after_event_triggers: dict[str, tuple[TriggerSpec, ...]] = field(default_factory=dict)  # by event type
    tasks_in_dependency_order: tuple[CompiledTask, ...] = ()

    @property
    def id(self) -> str:
        return self.spec.id

    def property_spec(self, device_id: str, prop: str):
        device = self.devices_by_id.get(device_id)
        return device.property(prop) if device is not None else None


def compile_scenario(spec: ScenarioSpec) -> CompiledScenario:
    """Build the indexed form of a scenario that already passed validation.

    Raises CompileError when the scenario violates invariants (callers must
    validate first; this is a guard, not a second validator).
    """
    from shine.scenario.validator import validate_scenario

    report = validate_scenario(spec)
    if not report.ok:
        first = report.errors()[0]
        raise CompileError(f"scenario '{spec.id}' failed validation: {first.path}: {first.message}")

    checked_rules: list[CompiledRule] = []
    ordered = sorted(enumerate(spec.rules), key=lambda pair: (pair[1].priority, pair[0]))
    for order, (_, rule) in enumerate(ordered):
        checked_rules.append(
            CompiledRule(rule=rule, condition=compile_condition(rule.condition, spec), order=order)
        )

    constraints_by_target: dict[tuple[str, str], list[CompiledRule]] = {}
    for compiled in checked_rules:
        if compiled.rule.kind != "constraint":
            continue
        for block in compiled.rule.blocks:
            constraints_by_target.setdefault((block.device_id, block.prop), []).append(compiled)

    tasks = {task.id: CompiledTask(task=task, goal=compile_condition(task.goal, spec)) for task in spec.tasks}

    at_time = sorted(
        (trig for trig in spec.triggers if isinstance(trig.when, AtTime)),
        key=lambda trig: (trig.when.seconds, _doc_index(spec.triggers, trig)),
    )
    after_event: dict[str, list[TriggerSpec]] = {}
    for trig in spec.triggers:
        if isinstance(trig.when, AfterEvent):
            after_event.setdefault(trig.when.event_type, []).append(trig)

    return CompiledScenario(
        spec=spec,
        rooms_by_id={room.id: room for room in spec.rooms},
        devices_by_id={dev.id: dev for dev in spec.devices},
        rules_by_id={compiled.rule.id: compiled for compiled in checked_rules},
        triggers_by_id={trig.id: trig for trig in spec.triggers},
        tasks_by_id=tasks,
        explanations_by_id={exp.id: exp for exp in spec.explanations},
        action_rules=tuple(c for c in checked_rules if c.rule.kind == "action"),
        constraint_rules=tuple(c for c in checked_rules if c.rule.kind == "constraint"),
        constraints_by_target={target: tuple(rules) for target, rules in constraints_by_target.items()},
        at_time_triggers=tuple(at_time),
        after_event_triggers={etype: tuple(trigs) for etype, trigs in after_event.items()},
        tasks_in_dependency_order=tuple(_topo_tasks(tasks)),
    )


def _doc_index(triggers: tuple[TriggerSpec, ...], trig: TriggerSpec) -> int:
    for i, candidate in enumerate(triggers):
        if candidate is trig:
            return i
    return len(triggers)


def _topo_tasks(tasks: dict[str, CompiledTask]) -> list[CompiledTask]:
    """Dependency-parents-first ordering (the graph is acyclic post-validation)."""
    ordered: list[CompiledTask] = []
    placed: set[str] = set()

    def place(task_id: str) -> None:
        if task_id in placed:
            return
        task = tasks[task_id]
        if task.task.depends_on is not None and task.task.depends_on in tasks:
            place(task.task.depends_on)
        placed.add(task_id)
        ordered.append(task)

    for task_id in tasks:
        place(task_id)
    return ordered
