"""Session runtime: broadcast shape, read consistency, log monotonicity."""

from __future__ import annotations

import json
import threading

import pytest

from shine.scenario.compiler import compile_scenario
from shine.scenario.parser import parse_scenario_obj
from shine.service.protocol import make_client_event
from shine.service.runtime import SessionRuntime
from shine.storage.drivers import MemoryDriver
from tests.test_rules import boolean_scenario, chain_rules

pytestmark = pytest.mark.unit


@pytest.fixture()
def chain_runtime(storage):
    doc = boolean_scenario(chain_rules(), {"x": False, "y": False, "z": False})
    compiled = compile_scenario(parse_scenario_obj(doc))
    runtime = SessionRuntime("chain", compiled, storage)
    runtime.start()
    return runtime


def interact(runtime, device, value, seq=1):
    return runtime.handle_client_event(
        make_client_event("device_interaction", runtime.session_id, seq, {"deviceId": device, "property": "on", "value": value})
    )


def test_cascade_broadcasts_one_event_with_ordered_causes(chain_runtime):
    # seed z, rule B sets y, rule A sets x: three deltas, one state_update
    events = interact(chain_runtime, "z", True)
    updates = [e for e in events if e["type"] == "state_update"]
    assert len(updates) == 1
    changes = updates[0]["payload"]["changes"]
    assert [c["target"]["device"] for c in changes] == ["z", "y", "x"]
    assert [c["cause"]["kind"] for c in changes] == ["user", "rule", "rule"]
    assert changes[1]["cause"]["ruleId"] == "B"
    assert changes[2]["cause"]["depth"] == 2


def test_noop_interaction_emits_no_state_update(chain_runtime):
    events = interact(chain_runtime, "z", False)  # already false
    assert [e for e in events if e["type"] == "state_update"] == []


def test_log_t_ms_is_non_decreasing(demo_compiled, storage):
    runtime = SessionRuntime("mono", demo_compiled, storage)
    runtime.start()
    interact_seq = 0
    for device, value in (("window", True), ("kitchen_lamp", True)):
        interact_seq += 1
        runtime.handle_client_event(
            make_client_event("device_interaction", "mono", interact_seq, {"deviceId": device, "property": "open" if device == "window" else "power", "value": value})
        )
        runtime.advance_virtual(runtime.world.clock_ms + 30_000)
    runtime.complete()
    stamps = [e.t_ms for e in storage.read_session("mono")]
    assert stamps == sorted(stamps)


def test_summary_contains_every_task_outcome(demo_compiled, storage):
    runtime = SessionRuntime("sum", demo_compiled, storage)
    runtime.start()
    summary = runtime.complete()
    assert set(summary["tasks"]) == {"open-window", "heater-off", "kitchen-light"}
    assert summary["tasks"]["open-window"]["status"] == "active"
    assert summary["durationMs"] == 0


def test_reads_never_observe_half_applied_pipelines(chain_runtime):
    """get_state is serialized against the interaction pipeline: the chain
    cascade (z -> y -> x) must appear atomic to concurrent readers."""
    inconsistent = []
    stop = threading.Event()

    def reader():
        while not stop.is_set():
            snap = chain_runtime.snapshot_payload()
            values = {d: props["on"] for d, props in snap["devices"].items()}
            if values not in ({"x": False, "y": False, "z": False}, {"x": True, "y": True, "z": True}):
                inconsistent.append(values)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    for thread in threads:
        thread.start()
    interact(chain_runtime, "z", True)
    stop.set()
    for thread in threads:
        thread.join()
    assert inconsistent == []


def test_wire_events_are_json_serializable(chain_runtime):
    for event in interact(chain_runtime, "z", True):
        json.dumps(event)
