"""Explanation selection, rendering, delivery decisions, queries, ratings."""

from __future__ import annotations

import pytest

from shine.errors import ExplanationError
from shine.explain.engine import (
    BlockedInteractionCause,
    DeliveryDecision,
    ExplanationManager,
    RuleFiredCause,
    TriggerFiredCause,
    UNMATCHED_QUERY_TEXT,
    UserRequestCause,
    render_template,
)
from shine.scenario.types import DeliveryMode, ExplanationSpec
from shine.sim.world import init_world

pytestmark = pytest.mark.unit

BLOCK_CAUSE = BlockedInteractionCause("keep-heater-on", "heater", "power", False)


@pytest.fixture()
def manager(demo_compiled):
    return ExplanationManager(demo_compiled, DeliveryMode.PUSH, "s1")


@pytest.fixture()
def snapshot(demo_compiled):
    world, _ = init_world(demo_compiled, {"outside_temp": 10})
    return world.snapshot()


def test_select_for_blocked_interaction(manager):
    spec = manager.select_explanation(BLOCK_CAUSE)
    assert spec.id == "heater-blocked"
    assert spec.template == "The indoor temperature is lower than 15°C."


def test_select_none_when_rule_has_no_attachment(demo_compiled, demo_doc):
    import copy

    from shine.scenario.compiler import compile_scenario
    from shine.scenario.parser import parse_scenario_obj

    doc = copy.deepcopy(demo_doc)
    del doc["rules"][1]["explanationId"]
    compiled = compile_scenario(parse_scenario_obj(doc))
    manager = ExplanationManager(compiled, DeliveryMode.PUSH, "s1")
    assert manager.select_explanation(RuleFiredCause("cold-draft-heater-on")) is None


def test_user_request_resolves_most_recent_cause_on_device(manager):
    manager.note_cause(BLOCK_CAUSE)
    spec = manager.select_explanation(UserRequestCause("heater"))
    assert spec.id == "heater-blocked"
    assert manager.select_explanation(UserRequestCause("window")) is None
    # device-less requests resolve against the most recent cause overall
    assert manager.select_explanation(UserRequestCause()).id == "heater-blocked"


def test_user_request_with_no_history_is_none(manager):
    assert manager.select_explanation(UserRequestCause("heater")) is None


def test_recency_is_overwritten(manager):
    manager.note_cause(BLOCK_CAUSE)
    manager.note_cause(TriggerFiredCause("lamp-failure"))
    assert manager.select_explanation(UserRequestCause("kitchen_lamp")).id == "lamp-failure-note"
    assert manager.select_explanation(UserRequestCause()).id == "lamp-failure-note"
    assert manager.select_explanation(UserRequestCause("heater")).id == "heater-blocked"


# --- rendering ------------------------------------------------------------------


def test_render_substitutes_context(snapshot):
    spec = ExplanationSpec(id="x", template="Outside it is {{context.outside_temp}}°C")
    assert render_template(spec, snapshot) == "Outside it is 10°C"


def test_render_without_placeholders_is_identity(snapshot):
    spec = ExplanationSpec(id="x", template="No placeholders here.")
    assert render_template(spec, snapshot) == "No placeholders here."


def test_render_trims_trailing_zeros(snapshot):
    snapshot.device_values["heater"]["target"] = 15.50
    spec = ExplanationSpec(id="x", template="Target {{device.heater.target}}°C")
    assert render_template(spec, snapshot) == "Target 15.5°C"


def test_render_device_booleans_as_on_off(snapshot):
    spec = ExplanationSpec(id="x", template="Heater is {{device.heater.power}}")
    assert render_template(spec, snapshot) == "Heater is on"


def test_render_is_deterministic(snapshot):
    spec = ExplanationSpec(id="x", template="{{device.kitchen_lamp.brightness}} / {{context.outside_temp}}")
    assert render_template(spec, snapshot) == render_template(spec, snapshot) == "medium / 10"


# --- delivery decisions ------------------------------------------------------------


def make_instance(manager, snapshot, cause=BLOCK_CAUSE):
    spec = manager.select_explanation(cause)
    instance, reason = manager.create_instance(cause, spec, snapshot)
    assert reason is None
    return instance


def test_push_mode_sends_now(manager, snapshot):
    instance = make_instance(manager, snapshot)
    assert manager.deliver(instance, 1000) == DeliveryDecision.SEND_NOW
    assert instance.delivered_at_ms == 1000


def test_pull_mode_holds_until_release(demo_compiled, snapshot):
    manager = ExplanationManager(demo_compiled, DeliveryMode.PULL, "s1")
    instance = make_instance(manager, snapshot)
    assert manager.deliver(instance, 1000) == DeliveryDecision.HOLD
    assert not instance.delivered
    released = manager.release_held()
    assert released is instance
    assert manager.release_held() is None


def test_interactive_mode_sends_now(demo_compiled, snapshot):
    manager = ExplanationManager(demo_compiled, DeliveryMode.INTERACTIVE, "s1")
    instance = make_instance(manager, snapshot)
    assert manager.deliver(instance, 5) == DeliveryDecision.SEND_NOW


# --- interactive queries --------------------------------------------------------------


@pytest.fixture()
def interactive(demo_compiled, snapshot):
    manager = ExplanationManager(demo_compiled, DeliveryMode.INTERACTIVE, "s1")
    parent = make_instance(manager, snapshot)
    manager.deliver(parent, 0)
    return manager, parent, snapshot


def test_query_matches_keywords(interactive):
    manager, parent, snapshot = interactive
    instance, matched = manager.handle_query("why is the indoor temperature low?", parent, snapshot)
    assert matched
    assert instance.text == "The window is open and the outside temperature is below 15°C."
    assert instance.parent_instance_id == parent.instance_id


def test_empty_query_falls_back(interactive):
    manager, parent, snapshot = interactive
    instance, matched = manager.handle_query("", parent, snapshot)
    assert not matched
    assert instance.text == UNMATCHED_QUERY_TEXT


def test_tie_breaks_to_lowest_index(demo_compiled, snapshot):
    # two follow-ups scoring equally: the first in the list wins (oracle:
    # identical singleton keyword sets make every score a tie)
    import copy

    from shine.scenario.compiler import compile_scenario
    from shine.scenario.parser import parse_scenario_obj, scenario_to_json_obj

    doc = scenario_to_json_obj(demo_compiled.spec)
    doc["explanations"][0]["followUps"] = [
        {"keywords": ["tie"], "explanationId": "heater-blocked-cause"},
        {"keywords": ["tie"], "explanationId": "weather-note"},
    ]
    compiled = compile_scenario(parse_scenario_obj(doc))
    manager = ExplanationManager(compiled, DeliveryMode.INTERACTIVE, "s1")
    parent = make_instance(manager, snapshot)
    manager.deliver(parent, 0)
    instance, matched = manager.handle_query("tie tie tie", parent, snapshot)
    assert matched
    assert instance.spec_id == "heater-blocked-cause"


def test_query_requires_interactive_mode(manager, snapshot):
    parent = make_instance(manager, snapshot)
    manager.deliver(parent, 0)
    with pytest.raises(ExplanationError):
        manager.handle_query("why?", parent, snapshot)


def test_chain_never_revisits_spec(interactive):
    manager, parent, snapshot = interactive
    child, _ = manager.handle_query("why window temperature", parent, snapshot)
    assert len(set(child.chain_spec_ids)) == len(child.chain_spec_ids)
    # the deepest spec has no follow-ups; further queries fall back rather than cycle
    manager.mark_delivered(child, 1)
    grandchild, matched = manager.handle_query("why window temperature", child, snapshot)
    assert not matched
    assert grandchild.text == UNMATCHED_QUERY_TEXT


# --- ratings ------------------------------------------------------------------------


def test_rating_roundtrip(manager, snapshot):
    instance = make_instance(manager, snapshot)
    manager.deliver(instance, 0)
    rating, revision = manager.record_rating(instance.instance_id, "up", 10)
    assert (rating.value, revision) == ("up", False)


def test_rating_revision_overwrites(manager, snapshot):
    instance = make_instance(manager, snapshot)
    manager.deliver(instance, 0)
    manager.record_rating(instance.instance_id, "down", 10)
    rating, revision = manager.record_rating(instance.instance_id, "up", 20)
    assert revision is True
    assert manager.ratings[instance.instance_id].value == "up"


def test_rating_unknown_instance_rejected(manager):
    with pytest.raises(ExplanationError):
        manager.record_rating("exp-404", "up", 0)


def test_rating_before_delivery_rejected(demo_compiled, snapshot):
    manager = ExplanationManager(demo_compiled, DeliveryMode.PULL, "s1")
    instance = make_instance(manager, snapshot)
    manager.deliver(instance, 0)  # held, not delivered
    with pytest.raises(ExplanationError):
        manager.record_rating(instance.instance_id, "up", 0)
