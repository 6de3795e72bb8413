"""World state: init, interactions, constraint blocking, snapshots."""

from __future__ import annotations

import copy
import random

import pytest
from hypothesis import given, strategies as st

from shine.errors import InteractionError
from shine.scenario.compiler import compile_scenario
from shine.scenario.parser import parse_scenario_obj
from shine.sim.types import Blocked, Committed, DirectWrite, RuleFiring, TaskChange
from shine.sim.world import init_world

pytestmark = pytest.mark.unit


def test_init_applies_defaults_and_overrides(demo_compiled):
    world, _ = init_world(demo_compiled, {"outside_temp": 10})
    assert world.context_vars["outside_temp"] == 10.0
    assert world.device_values[("heater", "power")] is True
    assert world.clock_ms == 0


def test_init_rejects_unknown_context(demo_compiled):
    with pytest.raises(InteractionError):
        init_world(demo_compiled, {"inside_temp": 10})


def test_init_rejects_kind_mismatch(demo_compiled):
    with pytest.raises(InteractionError):
        init_world(demo_compiled, {"outside_temp": "cold"})


def test_init_without_rules_or_triggers_only_activates_tasks(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["rules"] = []
    doc["triggers"] = []
    world, happenings = init_world(compile_scenario(parse_scenario_obj(doc)))
    assert all(isinstance(h, TaskChange) for h in happenings)


def test_rule_true_at_init_fires_exactly_once(demo_doc):
    # oracle: window starts open with outside_temp below the threshold, so the
    # enforcement rule's condition is true in the initial state; the
    # brute-force baseline (all rules unobserved=false) fires it once
    doc = copy.deepcopy(demo_doc)
    doc["devices"][1]["properties"][0]["initial"] = True
    doc["contextDefaults"]["outside_temp"] = 5
    world, happenings = init_world(compile_scenario(parse_scenario_obj(doc)))
    firings = [h for h in happenings if isinstance(h, RuleFiring)]
    assert [f.rule_id for f in firings] == ["cold-draft-heater-on"]
    # re-evaluating without an edge does not fire again
    assert world.evaluate_rules() == []


def test_blocked_outcome_and_purity(demo_compiled):
    world, _ = init_world(demo_compiled, {"outside_temp": 10})
    world.apply_interaction("window", "open", True, 1)
    before = world.snapshot().canonical_json()
    outcome = world.apply_interaction("heater", "power", False, 2)
    assert outcome == Blocked(rule_id="keep-heater-on", explanation_id="heater-blocked")
    assert world.snapshot().canonical_json() == before


def test_commit_when_constraint_condition_false(demo_compiled):
    # hand-evaluated: window closed => condition false => write commits
    world, _ = init_world(demo_compiled, {"outside_temp": 10})
    outcome = world.apply_interaction("heater", "power", False, 1)
    assert isinstance(outcome, Committed)
    assert world.device_values[("heater", "power")] is False


def test_noop_write_commits_without_rules(demo_compiled):
    world, _ = init_world(demo_compiled)
    outcome = world.apply_interaction("heater", "power", True, 1)
    assert isinstance(outcome, Committed)
    assert outcome.deltas == []
    assert len(outcome.happenings) == 1
    assert isinstance(outcome.happenings[0], DirectWrite)


def test_interaction_error_codes(demo_compiled):
    world, _ = init_world(demo_compiled)
    with pytest.raises(InteractionError) as exc:
        world.apply_interaction("heater", "fan", True, 1)
    assert exc.value.code == "unknown_target"
    with pytest.raises(InteractionError) as exc:
        world.apply_interaction("heater", "target", 23.3, 1)
    assert exc.value.code == "out_of_domain"


def test_non_writable_property_rejected(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["devices"][0]["properties"][0]["userWritable"] = False
    world, _ = init_world(compile_scenario(parse_scenario_obj(doc)))
    with pytest.raises(InteractionError) as exc:
        world.apply_interaction("heater", "power", False, 1)
    assert exc.value.code == "not_writable"


def test_snapshot_is_immutable_copy(demo_compiled):
    world, _ = init_world(demo_compiled)
    snap = world.snapshot()
    world.apply_interaction("window", "open", True, 1)
    assert snap.device_values["window"]["open"] is False
    assert world.snapshot().device_values["window"]["open"] is True


def test_snapshot_round_trips(demo_compiled):
    import json

    world, _ = init_world(demo_compiled)
    obj = json.loads(world.snapshot().canonical_json())
    assert obj["devices"]["heater"]["target"] == 21.0
    assert obj["tasks"]["heater-off"]["status"] == "locked"


# --- domain safety property --------------------------------------------------------


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 7)), max_size=40), st.booleans())
def test_domain_safety_under_random_interactions(demo_compiled, moves, cold):
    """After any committed/blocked/rejected interaction sequence, every device
    value stays within its declared domain."""
    world, _ = init_world(demo_compiled, {"outside_temp": 5 if cold else 20})
    targets = [
        ("heater", "power", [True, False]),
        ("window", "open", [True, False]),
        ("kitchen_lamp", "power", [True, False]),
        ("kitchen_lamp", "brightness", ["low", "high", "blinding"]),
        ("heater", "target", [5.0, 21.5, 30.0, 31.0, 17.3]),
    ]
    for which, pick in moves:
        device, prop, values = targets[which]
        value = values[pick % len(values)]
        try:
            world.apply_interaction(device, prop, value, 1)
        except InteractionError:
            pass
        for (dev, name), current in world.device_values.items():
            prop_spec = demo_compiled.property_spec(dev, name)
            assert prop_spec.in_domain(current), (dev, name, current)
