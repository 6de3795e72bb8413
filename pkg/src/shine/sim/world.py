"""World state and the operations that advance it.

A WorldState belongs to exactly one session and must only be touched from
that session's serialized execution context. All operations are
deterministic: the same scenario, context and timestamped operation
sequence always produces the same happenings and snapshots.

Rule semantics in one paragraph: action rules are edge-triggered, evaluated
in synchronous passes. Each pass observes every action rule's condition
against the state at the start of the pass; a rule fires when that
observation is true but the previous pass's observation (initially false)
was not. Firing rules apply their actions in compiled order, which is what
the next pass observes. Evaluation stops when a pass fires nothing or the
cascade depth limit is reached (truncation is an observable happening, not
an error); the per-rule observations persist on the world between
evaluations, so an edge is "became true since the rules last looked".
Constraint rules never fire; they veto user writes whose hypothetical
post-state satisfies their condition. Trigger effects bypass constraints:
the experimenter is trusted.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from shine.errors import ClockError, InteractionError, ShineError
from shine.scenario.compiler import CompiledScenario
from shine.scenario.types import (
    ActionSpec,
    AfterEvent,
    ContextRef,
    DeviceRef,
    Literal,
    TriggerSpec,
    literal_kind,
    normalize_literal,
)
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
    Snapshot,
    StateDelta,
    TaskChange,
    TaskState,
    TaskStatus,
    TriggerFired,
    TriggerFiring,
    UserInteraction,
)

DEFAULT_CASCADE_DEPTH_LIMIT = 16


class _Overlay(dict):
    """Read view of device values with one hypothetical write on top."""

    def __init__(self, base: dict, key: tuple[str, str], value: Literal):
        super().__init__()
        self._base = base
        self._key = key
        self._value = value

    def __getitem__(self, key):
        if key == self._key:
            return self._value
        return self._base[key]


@dataclass
class WorldState:
    scenario: CompiledScenario
    device_values: dict[tuple[str, str], Literal]
    context_vars: dict[str, Literal]
    clock_ms: int = 0
    task_states: dict[str, TaskState] = field(default_factory=dict)
    fired_triggers: set[str] = field(default_factory=set)
    cascade_depth_limit: int = DEFAULT_CASCADE_DEPTH_LIMIT
    # last observed truth per action rule id (edge detection baseline)
    rule_truth: dict[str, bool] = field(default_factory=dict)
    # armed trigger deadlines: (deadline_ms, doc_index, arm_seq, trigger)
    pending_triggers: list = field(default_factory=list)
    _arm_seq: int = 0

    # -- construction -----------------------------------------------------------

    def snapshot(self) -> Snapshot:
        return Snapshot(
            device_values=_nest(self.device_values),
            context=dict(self.context_vars),
            clock_ms=self.clock_ms,
            tasks={task_id: state.to_json_obj() for task_id, state in self.task_states.items()},
        )

    # -- interactions -----------------------------------------------------------

    def apply_interaction(self, device_id: str, prop: str, value, event_id: int) -> InteractionOutcome:
        """Attempt a user write.

        Raises InteractionError for malformed requests (unknown target,
        non-writable property, out-of-domain value); returns Blocked when a
        constraint rule vetoes the transition, leaving the world untouched.
        """
        prop_spec = self.scenario.property_spec(device_id, prop)
        if prop_spec is None:
            raise InteractionError("unknown_target", f"no property '{prop}' on device '{device_id}'")
        if not prop_spec.user_writable:
            raise InteractionError("not_writable", f"'{device_id}.{prop}' is not user writable")
        value = normalize_literal(value)
        if not prop_spec.in_domain(value):
            raise InteractionError("out_of_domain", f"value {value!r} is outside the domain of '{device_id}.{prop}'")

        key = (device_id, prop)
        old = self.device_values[key]
        if value == old:
            # idempotent no-op: commits without constraint checks or rule passes
            self._note_occurrence("DEVICE_INTERACTION", {device_id})
            return Committed((DirectWrite(device_id, prop, value, None, event_id),))

        hypothetical = _Overlay(self.device_values, key, value)
        for compiled in self.scenario.constraints_by_target.get(key, ()):
            covered = any(block.covers(device_id, prop, value) for block in compiled.rule.blocks)
            if covered and compiled.condition.evaluate(hypothetical, self.context_vars):
                self._note_occurrence("INTERACTION_BLOCKED", {device_id})
                return Blocked(rule_id=compiled.rule.id, explanation_id=compiled.rule.explanation_id)

        self.device_values[key] = value
        delta = StateDelta(DeviceRef(device_id, prop), old, value, UserInteraction(event_id))
        happenings: list[Happening] = [DirectWrite(device_id, prop, value, delta, event_id)]
        self._note_occurrence("DEVICE_INTERACTION", {device_id})
        happenings.extend(self.evaluate_rules())
        happenings.extend(self.check_tasks())
        return Committed(tuple(happenings))

    # -- rule engine -------------------------------------------------------------

    def evaluate_rules(self, seed_deltas: tuple[StateDelta, ...] = ()) -> list[Happening]:
        """Edge-triggered fixpoint over the compiled action-rule order.

        ``seed_deltas`` (already applied by the caller) are accepted for
        interface completeness; edge detection compares each pass's
        observations against the persistent previous observations, so the
        seed change is visible as an edge without replaying the deltas.
        """
        del seed_deltas
        happenings: list[Happening] = []
        truncated = False
        for depth in range(1, self.cascade_depth_limit + 1):
            observed = {
                compiled.rule.id: compiled.condition.evaluate(self.device_values, self.context_vars)
                for compiled in self.scenario.action_rules
            }
            edges = [
                compiled
                for compiled in self.scenario.action_rules
                if observed[compiled.rule.id] and not self.rule_truth.get(compiled.rule.id, False)
            ]
            self.rule_truth.update(observed)
            if not edges:
                break
            for compiled in edges:
                deltas = self._apply_actions(compiled.rule.actions, RuleFired(compiled.rule.id, depth))
                happenings.append(
                    RuleFiring(
                        rule_id=compiled.rule.id,
                        depth=depth,
                        at_ms=self.clock_ms,
                        deltas=tuple(deltas),
                        explanation_id=compiled.rule.explanation_id,
                    )
                )
                self._note_occurrence("RULE_FIRED", {action.device_id for action in compiled.rule.actions})
            truncated = depth == self.cascade_depth_limit
        if truncated:
            happenings.append(CascadeTruncated(depth=self.cascade_depth_limit, at_ms=self.clock_ms))
        return happenings

    def _apply_actions(self, actions: tuple[ActionSpec, ...], cause: MutationCause) -> list[StateDelta]:
        deltas: list[StateDelta] = []
        for action in actions:
            key = (action.device_id, action.prop)
            old = self.device_values[key]
            if old != action.value:
                self.device_values[key] = action.value
                deltas.append(StateDelta(DeviceRef(action.device_id, action.prop), old, action.value, cause))
        return deltas

    # -- clock and triggers --------------------------------------------------------

    def advance_clock(self, to_ms: int) -> list[Happening]:
        """Move the virtual clock forward, firing due triggers in
        (deadline, document order) and sweeping task timeouts as the clock
        passes them."""
        if to_ms < self.clock_ms:
            raise ClockError(f"clock regression: {to_ms} < {self.clock_ms}")
        happenings: list[Happening] = []
        while True:
            entry = self._pop_due_trigger(to_ms)
            if entry is None:
                break
            deadline, trigger = entry
            self.clock_ms = max(self.clock_ms, deadline)
            happenings.extend(self._sweep_timeouts())
            happenings.extend(self._fire_trigger(trigger))
        self.clock_ms = to_ms
        happenings.extend(self._sweep_timeouts())
        return happenings

    def _pop_due_trigger(self, to_ms: int) -> tuple[int, TriggerSpec] | None:
        while self.pending_triggers:
            deadline, _doc, _seq, trigger = self.pending_triggers[0]
            if deadline > to_ms:
                return None
            heapq.heappop(self.pending_triggers)
            if trigger.one_shot and trigger.id in self.fired_triggers:
                continue
            return deadline, trigger
        return None

    def _fire_trigger(self, trigger: TriggerSpec) -> list[Happening]:
        self.fired_triggers.add(trigger.id)
        deltas: list[StateDelta] = []
        cause = TriggerFired(trigger.id)
        for effect in trigger.effects:
            if isinstance(effect, ActionSpec):
                deltas.extend(self._apply_actions((effect,), cause))
            else:
                old = self.context_vars[effect.name]
                if old != effect.value:
                    self.context_vars[effect.name] = effect.value
                    deltas.append(StateDelta(ContextRef(effect.name), old, effect.value, cause))
        happenings: list[Happening] = [
            TriggerFiring(trigger_id=trigger.id, at_ms=self.clock_ms, deltas=tuple(deltas), explanation_id=trigger.explanation_id)
        ]
        self._note_occurrence(
            "TRIGGER_FIRED",
            {effect.device_id for effect in trigger.effects if isinstance(effect, ActionSpec)},
        )
        happenings.extend(self.evaluate_rules())
        happenings.extend(self.check_tasks())
        return happenings

    def _note_occurrence(self, event_type: str, device_ids: set[str]) -> None:
        """Arm afterEvent triggers that match an occurrence happening now."""
        for trigger in self.scenario.after_event_triggers.get(event_type, ()):
            when: AfterEvent = trigger.when
            if when.device_id is not None and when.device_id not in device_ids:
                continue
            if trigger.one_shot and trigger.id in self.fired_triggers:
                continue
            deadline = self.clock_ms + _to_ms(when.delay_seconds)
            doc_index = list(self.scenario.spec.triggers).index(trigger)
            self._arm_seq += 1
            heapq.heappush(self.pending_triggers, (deadline, doc_index, self._arm_seq, trigger))

    # -- tasks ------------------------------------------------------------------------

    def check_tasks(self) -> list[TaskChange]:
        """Unlock tasks whose dependency completed and complete active tasks
        whose goal holds, in dependency order."""
        changes: list[TaskChange] = []
        for compiled in self.scenario.tasks_in_dependency_order:
            task = compiled.task
            state = self.task_states[task.id]
            if state.status == TaskStatus.LOCKED and task.depends_on is not None:
                dep_state = self.task_states.get(task.depends_on)
                if dep_state is not None and dep_state.status == TaskStatus.COMPLETED:
                    state.status = TaskStatus.ACTIVE
                    state.started_at_ms = self.clock_ms
                    changes.append(TaskChange(task.id, TaskStatus.LOCKED, TaskStatus.ACTIVE, self.clock_ms))
            if state.status == TaskStatus.ACTIVE and compiled.goal.evaluate(self.device_values, self.context_vars):
                state.status = TaskStatus.COMPLETED
                state.ended_at_ms = self.clock_ms
                changes.append(TaskChange(task.id, TaskStatus.ACTIVE, TaskStatus.COMPLETED, self.clock_ms))
                self._note_occurrence("TASK_COMPLETED", set())
        return changes

    def _sweep_timeouts(self) -> list[TaskChange]:
        """Time out active tasks once the clock has moved strictly past
        ``startedAtMs + timeout``."""
        changes: list[TaskChange] = []
        for compiled in self.scenario.tasks_in_dependency_order:
            task = compiled.task
            if task.timeout_seconds is None:
                continue
            state = self.task_states[task.id]
            if state.status != TaskStatus.ACTIVE or state.started_at_ms is None:
                continue
            if self.clock_ms > state.started_at_ms + _to_ms(task.timeout_seconds):
                state.status = TaskStatus.TIMED_OUT
                state.ended_at_ms = self.clock_ms
                changes.append(TaskChange(task.id, TaskStatus.ACTIVE, TaskStatus.TIMED_OUT, self.clock_ms))
        return changes

    def abort_task(self, task_id: str) -> TaskChange:
        compiled = self.scenario.tasks_by_id.get(task_id)
        if compiled is None:
            raise ShineError(f"unknown task '{task_id}'")
        if not compiled.task.abortable:
            raise ShineError(f"task '{task_id}' is not abortable")
        state = self.task_states[task_id]
        if state.status != TaskStatus.ACTIVE:
            raise ShineError(f"task '{task_id}' is {state.status.value}, only active tasks can be aborted")
        state.status = TaskStatus.ABORTED
        state.ended_at_ms = self.clock_ms
        return TaskChange(task_id, TaskStatus.ACTIVE, TaskStatus.ABORTED, self.clock_ms)


def init_world(scenario: CompiledScenario, context: dict[str, Literal] | None = None) -> tuple[WorldState, list[Happening]]:
    """Create a session world: initial values, context overrides, time-zero
    triggers and the initial rule pass.

    Raises InteractionError for unknown context variables or overrides whose
    kind does not match the declared default.
    """
    overrides = {name: normalize_literal(value) for name, value in (context or {}).items()}
    defaults = scenario.spec.context_defaults
    for name, value in overrides.items():
        if name not in defaults:
            raise InteractionError("unknown_target", f"unknown context variable '{name}'")
        if literal_kind(value) != literal_kind(defaults[name]):
            raise InteractionError(
                "out_of_domain",
                f"context variable '{name}' is {literal_kind(defaults[name])}, got {literal_kind(value)}",
            )

    world = WorldState(
        scenario=scenario,
        device_values={
            (device.id, prop.name): prop.initial
            for device in scenario.spec.devices
            for prop in device.properties
        },
        context_vars={**defaults, **overrides},
    )
    happenings: list[Happening] = []
    for compiled in scenario.tasks_in_dependency_order:
        task = compiled.task
        if task.depends_on is None:
            world.task_states[task.id] = TaskState(status=TaskStatus.ACTIVE, started_at_ms=0)
            happenings.append(TaskChange(task.id, TaskStatus.LOCKED, TaskStatus.ACTIVE, 0))
        else:
            world.task_states[task.id] = TaskState(status=TaskStatus.LOCKED)

    happenings.extend(world.evaluate_rules())
    for trigger in scenario.at_time_triggers:
        if _to_ms(trigger.when.seconds) == 0:
            happenings.extend(world._fire_trigger(trigger))
        else:
            world._arm_seq += 1
            doc_index = list(scenario.spec.triggers).index(trigger)
            heapq.heappush(world.pending_triggers, (_to_ms(trigger.when.seconds), doc_index, world._arm_seq, trigger))
    happenings.extend(world.check_tasks())
    return world, happenings


def _to_ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def _nest(device_values: dict[tuple[str, str], Literal]) -> dict[str, dict[str, Literal]]:
    nested: dict[str, dict[str, Literal]] = {}
    for (device_id, prop), value in device_values.items():
        nested.setdefault(device_id, {})[prop] = value
    return nested
