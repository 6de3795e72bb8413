"""Deterministic headless participants for integration and acceptance runs.

A bot script is a JSON file (``.bot.json``) with an ordered step list. The
in-process runner drives a SessionRuntime directly under injected virtual
time; the network runner drives a live server through the real REST and
WebSocket protocol. Expect steps are assertions and fail the run with their
step index.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Any

from shine.errors import ShineError
from shine.scenario.compiler import CompiledScenario
from shine.scenario.types import DeliveryMode
from shine.service.protocol import encode_context_param, make_client_event
from shine.service.runtime import SessionRuntime, headless_wall_clock
from shine.storage.drivers import MemoryDriver, StorageDriver
from shine.storage.events import LogEvent

STEP_OPS = (
    "wait",
    "interact",
    "request_explanation",
    "query",
    "rate",
    "expect_blocked",
    "expect_task",
    "complete",
)


class BotScriptError(ShineError):
    """The bot script file is malformed."""


class BotRunFailure(ShineError):
    """An Expect step did not hold (or a step produced a server error)."""

    def __init__(self, step_index: int, message: str):
        self.step_index = step_index
        super().__init__(f"step {step_index}: {message}")


@dataclass(frozen=True)
class BotStep:
    op: str
    args: dict


@dataclass(frozen=True)
class BotScript:
    steps: tuple[BotStep, ...]


@dataclass
class BotResult:
    session_id: str
    summary: dict
    snapshot: dict
    events: list[LogEvent] = field(default_factory=list)
    server_events: list[dict] = field(default_factory=list)


def parse_bot_script(data: bytes | str) -> BotScript:
    """Parse and check a bot script: known ops, required args, exactly one
    Complete as the final step."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise BotScriptError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("steps"), list):
        raise BotScriptError("script must be an object with a 'steps' array")
    steps: list[BotStep] = []
    for i, raw in enumerate(doc["steps"]):
        if not isinstance(raw, dict) or "op" not in raw:
            raise BotScriptError(f"steps[{i}]: each step needs an 'op'")
        op = raw["op"]
        if op not in STEP_OPS:
            raise BotScriptError(f"steps[{i}]: unknown op {op!r}")
        args = {k: v for k, v in raw.items() if k != "op"}
        _check_step_args(op, args, i)
        steps.append(BotStep(op=op, args=args))
    completes = [i for i, step in enumerate(steps) if step.op == "complete"]
    if len(completes) != 1 or completes[0] != len(steps) - 1:
        raise BotScriptError("'complete' must appear exactly once, as the last step")
    return BotScript(steps=tuple(steps))


_REQUIRED_ARGS = {
    "wait": ("ms",),
    "interact": ("deviceId", "property", "value"),
    "query": ("text",),
    "rate": ("value",),
    "expect_task": ("taskId", "status"),
}


def _check_step_args(op: str, args: dict, index: int) -> None:
    for name in _REQUIRED_ARGS.get(op, ()):
        if name not in args:
            raise BotScriptError(f"steps[{index}]: '{op}' needs '{name}'")
    if op == "wait" and (not isinstance(args["ms"], int) or args["ms"] < 0):
        raise BotScriptError(f"steps[{index}]: 'ms' must be a non-negative integer")
    if op == "rate" and args["value"] not in ("up", "down"):
        raise BotScriptError(f"steps[{index}]: rating value must be 'up' or 'down'")


# --- in-process runner ----------------------------------------------------------


def run_bot(
    scenario: CompiledScenario,
    script: BotScript,
    seed: int = 0,
    mode: DeliveryMode | None = None,
    context_vars: dict | None = None,
    storage: StorageDriver | None = None,
) -> BotResult:
    """Run the full pipeline in-process under injected virtual time.

    The seed fixes the session id (and thereby the whole exported log, since
    everything else is deterministic).
    """
    storage = storage or MemoryDriver()
    session_id = f"sim-{seed:08x}"
    runtime = SessionRuntime(
        session_id=session_id,
        scenario=scenario,
        storage=storage,
        participant_id=f"bot-{seed}",
        delivery_mode=mode,
        context_vars=context_vars,
        wall_clock=headless_wall_clock,
        clock_source=None,
    )
    storage.put_session(
        {
            "sessionId": session_id,
            "scenarioId": scenario.id,
            "participantId": runtime.participant_id,
            "status": "active",
            "deliveryMode": runtime.delivery_mode.value,
            "createdAt": runtime.created_wall,
        }
    )
    driver = _InProcessDriver(runtime)
    summary = _execute(script, driver)
    return BotResult(
        session_id=session_id,
        summary=summary,
        snapshot=runtime.world.snapshot().to_json_obj(),
        events=storage.read_session(session_id),
        server_events=driver.server_events,
    )


class _InProcessDriver:
    def __init__(self, runtime: SessionRuntime):
        self.runtime = runtime
        self.server_events: list[dict] = []
        self.client_seq = 0
        self.runtime.add_sink(self.server_events.append)
        self.initial_events = self.runtime.start()

    def send(self, event_type: str, payload: dict) -> list[dict]:
        self.client_seq += 1
        frame = make_client_event(event_type, self.runtime.session_id, self.client_seq, payload)
        return self.runtime.handle_client_event(frame)

    def wait(self, ms: int) -> list[dict]:
        return self.runtime.advance_virtual(self.runtime.world.clock_ms + ms)

    def task_status(self, task_id: str) -> str | None:
        state = self.runtime.world.task_states.get(task_id)
        return state.status.value if state else None

    def complete(self) -> dict:
        return self.runtime.complete()


def _execute(script: BotScript, driver) -> dict:
    """Shared step loop for both drivers; raises BotRunFailure on mismatch."""
    last_interaction: str | None = None  # "committed" | "blocked"
    delivered_instances: list[str] = []

    def scan(events: list[dict]) -> tuple[str | None, str | None]:
        outcome = None
        error = None
        for event in events:
            if event["type"] == "interaction_blocked":
                outcome = "blocked"
            elif event["type"] == "state_update":
                outcome = outcome or "committed"
            elif event["type"] == "explanation":
                delivered_instances.append(event["payload"]["instanceId"])
            elif event["type"] == "error":
                error = event["payload"]["message"]
        return outcome, error

    summary: dict | None = None
    scan(getattr(driver, "initial_events", []))
    for index, step in enumerate(script.steps):
        if step.op == "wait":
            scan(driver.wait(step.args["ms"]))
            continue
        if step.op == "interact":
            events = driver.send(
                "device_interaction",
                {
                    "deviceId": step.args["deviceId"],
                    "property": step.args["property"],
                    "value": step.args["value"],
                },
            )
            outcome, error = scan(events)
            if error is not None:
                raise BotRunFailure(index, f"interaction rejected: {error}")
            last_interaction = outcome or "committed"
        elif step.op == "request_explanation":
            payload = {}
            if "deviceId" in step.args:
                payload["deviceId"] = step.args["deviceId"]
            _, error = scan(driver.send("explanation_request", payload))
            if error is not None:
                raise BotRunFailure(index, f"explanation request rejected: {error}")
        elif step.op == "query":
            _, error = scan(driver.send("explanation_query", {"text": step.args["text"]}))
            if error is not None and "interactive" not in error:
                raise BotRunFailure(index, f"query rejected: {error}")
        elif step.op == "rate":
            if not delivered_instances:
                raise BotRunFailure(index, "nothing delivered to rate")
            _, error = scan(
                driver.send(
                    "explanation_rating",
                    {"instanceId": delivered_instances[-1], "value": step.args["value"]},
                )
            )
            if error is not None:
                raise BotRunFailure(index, f"rating rejected: {error}")
        elif step.op == "expect_blocked":
            if last_interaction != "blocked":
                raise BotRunFailure(index, f"expected the last interaction to be blocked, was {last_interaction}")
        elif step.op == "expect_task":
            actual = driver.task_status(step.args["taskId"])
            if actual != step.args["status"]:
                raise BotRunFailure(
                    index, f"task '{step.args['taskId']}' is {actual}, expected {step.args['status']}"
                )
        elif step.op == "complete":
            summary = driver.complete()
    assert summary is not None  # script structure guarantees a final complete
    return summary


# --- network runner ----------------------------------------------------------------


def run_bot_via_network(
    base_url: str,
    scenario_id: str,
    script: BotScript,
    seed: int = 0,
    mode: DeliveryMode | None = None,
    context_vars: dict | None = None,
    settle_s: float = 0.3,
) -> BotResult:
    """Drive a live server through the real protocol (conformance runs).

    Virtual time is wall time here, so scripts with long waits belong in the
    in-process runner.
    """
    driver = _NetworkDriver(base_url, scenario_id, seed, mode, context_vars, settle_s)
    try:
        summary = _execute(script, driver)
        snapshot = driver.get_state()
        return BotResult(
            session_id=driver.session_id,
            summary=summary,
            snapshot=snapshot,
            server_events=driver.server_events,
        )
    finally:
        driver.close()


class _NetworkDriver:
    def __init__(self, base_url, scenario_id, seed, mode, context_vars, settle_s):
        import httpx
        from websockets.sync.client import connect

        self._httpx = httpx
        self.base_url = base_url.rstrip("/")
        self.settle_s = settle_s
        self.client_seq = 0
        self.server_events: list[dict] = []
        params: dict[str, Any] = {}
        if mode is not None:
            params["deliveryMode"] = mode.value
        if context_vars:
            params["contextVars"] = context_vars
        body = {"scenarioId": scenario_id, "participantId": f"bot-{seed}"}
        if params:
            body["context"] = encode_context_param(params)
        response = httpx.post(f"{self.base_url}/api/sessions", json=body, timeout=10)
        response.raise_for_status()
        created = response.json()
        self.session_id = created["sessionId"]
        self.socket = connect(created["wsUrl"], open_timeout=10)
        self.initial_events = self.drain()  # snapshot frame first

    def drain(self) -> list[dict]:
        """Collect frames until the socket has been quiet for settle_s."""
        frames: list[dict] = []
        while True:
            try:
                raw = self.socket.recv(timeout=self.settle_s)
            except TimeoutError:
                return frames
            frame = json.loads(raw)
            frames.append(frame)
            self.server_events.append(frame)

    def send(self, event_type: str, payload: dict) -> list[dict]:
        self.client_seq += 1
        self.socket.send(json.dumps(make_client_event(event_type, self.session_id, self.client_seq, payload)))
        return self.drain()

    def wait(self, ms: int) -> list[dict]:
        time.sleep(ms / 1000.0)
        return self.drain()

    def task_status(self, task_id: str) -> str | None:
        state = self.get_state()
        task = state.get("tasks", {}).get(task_id)
        return task["status"] if task else None

    def get_state(self) -> dict:
        response = self._httpx.get(f"{self.base_url}/api/sessions/{self.session_id}/state", timeout=10)
        response.raise_for_status()
        return response.json()

    def complete(self) -> dict:
        self.drain()
        response = self._httpx.post(f"{self.base_url}/api/sessions/{self.session_id}/complete", timeout=10)
        response.raise_for_status()
        return response.json()

    def close(self) -> None:
        try:
            self.socket.close()
        except Exception:
            pass
