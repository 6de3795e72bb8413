"""Scenario configuration language: types, parsing, validation, compilation."""

from shine.scenario.compiler import CheckedCondition, CompiledScenario, compile_condition, compile_scenario
from shine.scenario.parser import parse_scenario, serialize_scenario
from shine.scenario.types import (
    ActionSpec,
    AfterEvent,
    AtTime,
    ConditionExpr,
    ContextRef,
    DeviceRef,
    DeviceSpec,
    EnvironmentSet,
    ExplanationConfig,
    ExplanationSpec,
    Literal,
    PropertySpec,
    RoomSpec,
    RuleSpec,
    ScenarioSpec,
    TaskSpec,
    TriggerSpec,
    ValidationIssue,
    ValidationReport,
)
from shine.scenario.validator import validate_scenario

__all__ = [
    "ActionSpec",
    "AfterEvent",
    "AtTime",
    "CheckedCondition",
    "CompiledScenario",
    "ConditionExpr",
    "ContextRef",
    "DeviceRef",
    "DeviceSpec",
    "EnvironmentSet",
    "ExplanationConfig",
    "ExplanationSpec",
    "Literal",
    "PropertySpec",
    "RoomSpec",
    "RuleSpec",
    "ScenarioSpec",
    "TaskSpec",
    "TriggerSpec",
    "ValidationIssue",
    "ValidationReport",
    "compile_condition",
    "compile_scenario",
    "parse_scenario",
    "serialize_scenario",
    "validate_scenario",
]
