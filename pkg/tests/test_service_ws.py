"""Full socket event chains: interaction pipeline, delivery modes, protocol
error handling, reconnect snapshots, session isolation."""

from __future__ import annotations

import pytest
from starlette.testclient import TestClient

from shine.service.app import create_app
from shine.service.protocol import encode_context_param, make_client_event
from shine.storage.drivers import MemoryDriver
from shine.storage.events import EventType

pytestmark = pytest.mark.integration


@pytest.fixture()
def service(demo_compiled):
    storage = MemoryDriver()
    app = create_app({demo_compiled.id: demo_compiled}, storage, research_token="t")
    with TestClient(app) as client:
        client.storage = storage
        yield client


class WsSession:
    """Scripted client over the in-process socket."""

    def __init__(self, service, mode: str | None = None, context_vars: dict | None = None):
        self.service = service
        params = {}
        if mode:
            params["deliveryMode"] = mode
        if context_vars:
            params["contextVars"] = context_vars
        body = {"scenarioId": "demo-apartment", "participantId": "ws-test"}
        if params:
            body["context"] = encode_context_param(params)
        created = service.post("/api/sessions", json=body)
        assert created.status_code == 201
        self.session_id = created.json()["sessionId"]
        self.seq = 0
        self.socket = None

    def __enter__(self):
        self.ctx = self.service.websocket_connect(f"/ws/{self.session_id}")
        self.socket = self.ctx.__enter__()
        self.snapshot_frame = self.socket.receive_json()
        return self

    def __exit__(self, *exc):
        return self.ctx.__exit__(*exc)

    def send(self, event_type: str, payload: dict) -> None:
        self.seq += 1
        self.socket.send_json(make_client_event(event_type, self.session_id, self.seq, payload))

    def recv(self) -> dict:
        return self.socket.receive_json()

    def recv_until(self, event_type: str, limit: int = 10) -> list[dict]:
        """Frames up to and including the first of the given type."""
        frames = []
        for _ in range(limit):
            frame = self.recv()
            frames.append(frame)
            if frame["type"] == event_type:
                return frames
        raise AssertionError(f"no {event_type} frame within {limit} frames: {frames}")


def test_connect_sends_snapshot_first(service):
    with WsSession(service) as ws:
        assert ws.snapshot_frame["type"] == "state_update"
        snapshot = ws.snapshot_frame["payload"]["snapshot"]
        assert snapshot["devices"]["heater"]["power"] is True


def test_interaction_pipeline_blocked_then_push_explanation(service):
    with WsSession(service, context_vars={"outside_temp": 10}) as ws:
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        ws.recv_until("explanation")  # the enforcement rule fires and explains itself
        ws.send("device_interaction", {"deviceId": "heater", "property": "power", "value": False})
        frames = ws.recv_until("explanation")
        types = [f["type"] for f in frames]
        assert types.index("interaction_blocked") < types.index("explanation")
        blocked = frames[types.index("interaction_blocked")]
        assert blocked["payload"]["ruleId"] == "keep-heater-on"
        explanation = frames[types.index("explanation")]
        assert explanation["payload"]["text"] == "The indoor temperature is lower than 15°C."


def test_committed_interaction_broadcasts_ordered_changes(service):
    with WsSession(service, context_vars={"outside_temp": 10}) as ws:
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        frames = ws.recv_until("state_update")
        update = frames[-1]["payload"]
        targets = [c["target"] for c in update["changes"]]
        assert {"device": "window", "property": "open"} in targets
        causes = [c["cause"]["kind"] for c in update["changes"]]
        assert causes[0] == "user"


def test_telemetry_logs_but_does_not_respond(service):
    with WsSession(service) as ws:
        ws.send("client_telemetry", {"kind": "enter_room", "data": {"roomId": "kitchen"}})
        ws.send("device_interaction", {"deviceId": "kitchen_lamp", "property": "power", "value": True})
        frames = ws.recv_until("state_update")
        assert all(f["type"] != "error" for f in frames)
    rows = service.storage.read_session(ws.session_id)
    telemetry = [r for r in rows if r.type == EventType.CLIENT_TELEMETRY]
    assert len(telemetry) == 1
    assert telemetry[0].payload == {"kind": "enter_room", "data": {"roomId": "kitchen"}}


def test_rating_on_undelivered_instance_is_error_event(service):
    with WsSession(service) as ws:
        ws.send("explanation_rating", {"instanceId": "exp-404", "value": "up"})
        frames = ws.recv_until("error")
        assert frames[-1]["payload"]["code"] == "bad_request"


def test_malformed_frame_yields_protocol_error(service):
    with WsSession(service) as ws:
        ws.socket.send_text("not json")
        frame = ws.recv()
        assert frame["type"] == "error"
        assert frame["payload"]["code"] == "protocol_violation"
        # session stays live
        ws.send("device_interaction", {"deviceId": "kitchen_lamp", "property": "power", "value": True})
        ws.recv_until("state_update")


def test_unknown_event_type_rejected(service):
    with WsSession(service) as ws:
        ws.socket.send_json(make_client_event("client_telemetry", ws.session_id, 1, {"kind": "x", "extra": 1}))
        frame = ws.recv()
        assert frame["type"] == "error"


def test_event_for_completed_session_is_error(service):
    with WsSession(service) as ws:
        assert service.post(f"/api/sessions/{ws.session_id}/complete").status_code == 200
        ws.recv_until("session_end")
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        frames = ws.recv_until("error")
        assert frames[-1]["payload"]["code"] == "session_closed"


def test_server_seqs_strictly_increase_and_match_log(service):
    with WsSession(service, context_vars={"outside_temp": 10}) as ws:
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        ws.recv_until("state_update")
        ws.send("device_interaction", {"deviceId": "heater", "property": "power", "value": False})
        frames = ws.recv_until("explanation")
    rows = {r.seq for r in service.storage.read_session(ws.session_id)}
    seqs = [f["seq"] for f in frames]
    assert seqs == sorted(seqs)
    assert all(seq in rows for seq in seqs)


def test_reconnect_resumes_with_snapshot(service):
    with WsSession(service) as ws:
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        ws.recv_until("state_update")
        session_id = ws.session_id
    with service.websocket_connect(f"/ws/{session_id}") as socket:
        frame = socket.receive_json()
        assert frame["type"] == "state_update"
        assert frame["payload"]["snapshot"]["devices"]["window"]["open"] is True


def test_unknown_session_socket_rejected(service):
    with pytest.raises(Exception):
        with service.websocket_connect("/ws/ghost"):
            pass


def test_session_isolation(service):
    with WsSession(service) as a, WsSession(service) as b:
        a.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        a.recv_until("state_update")
        b.send("client_telemetry", {"kind": "idle"})
    rows_a = service.storage.read_session(a.session_id)
    rows_b = service.storage.read_session(b.session_id)
    assert all(r.session_id == a.session_id for r in rows_a)
    assert all(r.session_id == b.session_id for r in rows_b)
    assert not any(r.type == EventType.CLIENT_TELEMETRY for r in rows_a)
    assert not any(r.type == EventType.DEVICE_INTERACTION for r in rows_b)
    # B must not observe A's window state
    state_b = service.get(f"/api/sessions/{b.session_id}/state").json()
    assert state_b["devices"]["window"]["open"] is False


# --- delivery-mode separation over the real socket -----------------------------------


def blocked_heater_flow(service, mode: str) -> tuple[list, str]:
    with WsSession(service, mode=mode, context_vars={"outside_temp": 10}) as ws:
        ws.send("device_interaction", {"deviceId": "window", "property": "open", "value": True})
        # drain the enforcement rule's own explanation (held in pull mode)
        ws.recv_until("explanation_available" if mode == "pull" else "explanation")
        ws.send("device_interaction", {"deviceId": "heater", "property": "power", "value": False})
        if mode == "pull":
            frames = ws.recv_until("explanation_available")
            ws.send("explanation_request", {})
            frames += ws.recv_until("explanation")
        else:
            frames = ws.recv_until("explanation")
        if mode == "interactive":
            ws.send("explanation_query", {"text": "why is the window open making this happen?"})
            frames += ws.recv_until("explanation")
    return frames, ws.session_id


def test_push_mode_delivers_without_request(service):
    frames, session_id = blocked_heater_flow(service, "push")
    rows = [r.type for r in service.storage.read_session(session_id)]
    assert EventType.EXPLANATION_DELIVERED in rows
    assert EventType.EXPLANATION_REQUESTED not in rows


def test_pull_mode_delivers_only_after_request(service):
    frames, session_id = blocked_heater_flow(service, "pull")
    rows = [r.type for r in service.storage.read_session(session_id)]
    delivered = rows.index(EventType.EXPLANATION_DELIVERED)
    requested = rows.index(EventType.EXPLANATION_REQUESTED)
    assert requested < delivered
    # no explanation text crossed the wire before the request
    types = [f["type"] for f in frames]
    assert types.index("explanation_available") < types.index("explanation")


def test_interactive_mode_processes_queries(service):
    frames, session_id = blocked_heater_flow(service, "interactive")
    rows = [r.type for r in service.storage.read_session(session_id)]
    assert rows.count(EventType.EXPLANATION_QUERY) >= 1
    texts = [f["payload"]["text"] for f in frames if f["type"] == "explanation"]
    assert "The window is open and the outside temperature is below 15°C." in texts
