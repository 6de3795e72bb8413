"""External engine integration: fast path, timeout fallback, bad responses.

Timing-sensitive cases use injected transports, so no real waiting happens;
one test runs the real REST transport against an httpx mock.
"""

from __future__ import annotations

import json

import httpx
import pytest

from shine.explain.engine import ExplanationManager, TriggerFiredCause
from shine.explain.external import ExternalEngineClient
from shine.scenario.compiler import compile_scenario
from shine.scenario.parser import parse_scenario_obj, scenario_to_json_obj
from shine.scenario.types import DeliveryMode, EngineEndpoint
from shine.sim.world import init_world

pytestmark = pytest.mark.unit

ENDPOINT = EngineEndpoint(url="http://engine.test/explain", transport="rest")


def external_scenario(demo_compiled) -> dict:
    doc = scenario_to_json_obj(demo_compiled.spec)
    for exp in doc["explanations"]:
        if exp["id"] == "weather-note":
            exp["external"] = True
    doc["explanationConfig"]["engineEndpoint"] = {"url": ENDPOINT.url, "transport": "rest"}
    return doc


@pytest.fixture()
def scenario(demo_compiled):
    return compile_scenario(parse_scenario_obj(external_scenario(demo_compiled)))


@pytest.fixture()
def snapshot(scenario):
    world, _ = init_world(scenario, {"outside_temp": 10})
    return world.snapshot()


def manager_with(scenario, client) -> ExplanationManager:
    return ExplanationManager(scenario, DeliveryMode.PUSH, "s1", external_client=client)


def fake_transport(response=None, exc=None, recorder=None):
    def transport(url, request, timeout_s):
        if recorder is not None:
            recorder.append((url, request, timeout_s))
        if exc is not None:
            raise exc
        return response

    return transport


CAUSE = TriggerFiredCause("weather-drop")


def test_fast_engine_answer_is_used(scenario, snapshot):
    requests = []
    client = ExternalEngineClient(
        ENDPOINT, 2000, transport=fake_transport({"text": "Because rule R3 fired."}, recorder=requests)
    )
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert (instance.text, instance.source, reason) == ("Because rule R3 fired.", "external", None)
    # wire format: cause ids + full state snapshot + user context
    url, request, timeout_s = requests[0]
    assert url == ENDPOINT.url
    assert timeout_s == 2.0
    assert request["cause"] == {"type": "trigger_fired", "triggerId": "weather-drop"}
    assert request["state"]["devices"]["heater"]["power"] is True
    assert request["state"]["context"]["outside_temp"] == 10.0
    assert "clockMs" in request["state"]


def test_timeout_falls_back_to_template(scenario, snapshot):
    client = ExternalEngineClient(ENDPOINT, 2000, transport=fake_transport(exc=TimeoutError("simulated")))
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert instance.source == "externalFallback"
    assert reason == "timeout"
    assert instance.text == "The weather changed: outside it is 10°C now."


def test_empty_text_falls_back(scenario, snapshot):
    client = ExternalEngineClient(ENDPOINT, 2000, transport=fake_transport({"text": ""}))
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert (instance.source, reason) == ("externalFallback", "empty_text")
    assert instance.text


def test_malformed_response_falls_back(scenario, snapshot):
    client = ExternalEngineClient(ENDPOINT, 2000, transport=fake_transport({"explanation": "wrong key"}))
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert (instance.source, reason) == ("externalFallback", "bad_response")


def test_transport_error_falls_back(scenario, snapshot):
    client = ExternalEngineClient(ENDPOINT, 2000, transport=fake_transport(exc=ConnectionError("refused")))
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert (instance.source, reason) == ("externalFallback", "transport_error")


def test_fallback_totality_never_empty(scenario, snapshot):
    # every failure reason still yields non-empty participant-facing text
    for failure in (TimeoutError("t"), ConnectionError("c")):
        client = ExternalEngineClient(ENDPOINT, 2000, transport=fake_transport(exc=failure))
        manager = manager_with(scenario, client)
        spec = manager.select_explanation(CAUSE)
        instance, _ = manager.create_instance(CAUSE, spec, snapshot)
        assert instance.text


def test_real_rest_transport_against_mock(monkeypatch, scenario, snapshot):
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        assert body["sessionId"] == "s1"
        return httpx.Response(200, json={"text": "mock engine says hi", "followUpHints": ["why"]})

    mock = httpx.MockTransport(handler)
    original_post = httpx.post

    def post_via_mock(url, **kwargs):
        with httpx.Client(transport=mock) as client:
            return client.post(url, **kwargs)

    monkeypatch.setattr(httpx, "post", post_via_mock)
    client = ExternalEngineClient(ENDPOINT, 2000)
    manager = manager_with(scenario, client)
    spec = manager.select_explanation(CAUSE)
    instance, reason = manager.create_instance(CAUSE, spec, snapshot)
    assert (instance.text, instance.source, reason) == ("mock engine says hi", "external", None)


def test_websocket_transport_roundtrip_against_real_server(scenario, snapshot):
    # one request frame, one response frame, same payloads as REST
    import threading

    from websockets.sync.server import serve

    received = []

    def engine(connection):
        request = json.loads(connection.recv())
        received.append(request)
        connection.send(json.dumps({"text": "ws engine answer"}))

    with serve(engine, "127.0.0.1", 0) as server:
        port = server.socket.getsockname()[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        endpoint = EngineEndpoint(url=f"ws://127.0.0.1:{port}", transport="websocket")
        client = ExternalEngineClient(endpoint, 2000)
        text, reason = client.fetch({"sessionId": "s1", "cause": {}, "state": {}, "userContext": {}})
        server.shutdown()
    assert (text, reason) == ("ws engine answer", None)
    assert received[0]["sessionId"] == "s1"
