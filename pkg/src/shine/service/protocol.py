"""Wire protocol: envelopes, payload schemas, session context parameters.

Every frame on the session WebSocket is one JSON object
``{type, sessionId, seq, payload}``. Client seq is a client-side counter;
server events instead carry the log seq of the row they correspond to, so a
client can line its view up against the exported session trace.
"""

from __future__ import annotations

import base64
import binascii
import json

from shine.scenario.types import DeliveryMode

CLIENT_EVENT_TYPES = (
    "device_interaction",
    "explanation_request",
    "explanation_query",
    "explanation_rating",
    "client_telemetry",
    "abort_task",
)

SERVER_EVENT_TYPES = (
    "state_update",
    "interaction_blocked",
    "explanation",
    "explanation_available",
    "task_update",
    "session_end",
    "error",
)

# required payload fields per client event type: name -> allowed types
_CLIENT_PAYLOAD_SCHEMAS: dict[str, dict[str, tuple]] = {
    "device_interaction": {"deviceId": (str,), "property": (str,), "value": (bool, str, int, float)},
    "explanation_request": {},
    "explanation_query": {"text": (str,)},
    "explanation_rating": {"instanceId": (str,), "value": (str,)},
    "client_telemetry": {"kind": (str,)},
    "abort_task": {"taskId": (str,)},
}
_CLIENT_OPTIONAL_FIELDS: dict[str, dict[str, tuple]] = {
    "explanation_request": {"deviceId": (str,)},
    "explanation_query": {"parentInstanceId": (str,)},
    "client_telemetry": {"data": (dict,)},
}


class ProtocolViolation(Exception):
    """A client frame failed envelope or payload validation."""


def validate_client_event(frame: dict) -> dict:
    """Check envelope shape and per-type payload schema; returns the frame."""
    if not isinstance(frame, dict):
        raise ProtocolViolation("frame must be a JSON object")
    event_type = frame.get("type")
    if event_type not in CLIENT_EVENT_TYPES:
        raise ProtocolViolation(f"unknown client event type {event_type!r}")
    if not isinstance(frame.get("sessionId"), str):
        raise ProtocolViolation("missing or non-string sessionId")
    if not isinstance(frame.get("seq"), int) or isinstance(frame.get("seq"), bool):
        raise ProtocolViolation("missing or non-integer seq")
    payload = frame.get("payload")
    if not isinstance(payload, dict):
        raise ProtocolViolation("missing payload object")
    schema = _CLIENT_PAYLOAD_SCHEMAS[event_type]
    for name, allowed in schema.items():
        if name not in payload:
            raise ProtocolViolation(f"{event_type}: payload is missing '{name}'")
        if not isinstance(payload[name], allowed) or (
            bool not in allowed and isinstance(payload[name], bool)
        ):
            raise ProtocolViolation(f"{event_type}: payload field '{name}' has the wrong type")
    allowed_names = set(schema) | set(_CLIENT_OPTIONAL_FIELDS.get(event_type, {}))
    unknown = set(payload) - allowed_names
    if unknown:
        raise ProtocolViolation(f"{event_type}: unknown payload field '{sorted(unknown)[0]}'")
    return frame


def make_client_event(event_type: str, session_id: str, seq: int, payload: dict) -> dict:
    return {"type": event_type, "sessionId": session_id, "seq": seq, "payload": payload}


def make_server_event(event_type: str, session_id: str, log_seq: int, payload: dict) -> dict:
    assert event_type in SERVER_EVENT_TYPES, event_type
    return {"type": event_type, "sessionId": session_id, "seq": log_seq, "payload": payload}


# --- base64url session context parameters -------------------------------------


class ContextParamError(Exception):
    """The base64url session parameter did not decode to a valid object."""


def decode_context_param(param: str | None) -> dict:
    """Decode personalization parameters: an optional base64url-encoded JSON
    object with keys deliveryMode, contextVars, userContext (unknown keys
    rejected). Absent/empty means scenario defaults."""
    if not param:
        return {}
    padded = param + "=" * (-len(param) % 4)
    try:
        raw = base64.urlsafe_b64decode(padded.encode("ascii"))
    except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
        raise ContextParamError(f"invalid base64url: {exc}") from exc
    try:
        decoded = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContextParamError(f"parameter is not valid JSON: {exc}") from exc
    if not isinstance(decoded, dict):
        raise ContextParamError("parameter must decode to a JSON object")
    unknown = set(decoded) - {"deliveryMode", "contextVars", "userContext"}
    if unknown:
        raise ContextParamError(f"unknown key '{sorted(unknown)[0]}'")
    if "deliveryMode" in decoded:
        try:
            DeliveryMode(decoded["deliveryMode"])
        except ValueError as exc:
            raise ContextParamError(f"unknown deliveryMode {decoded['deliveryMode']!r}") from exc
    for key in ("contextVars", "userContext"):
        if key in decoded and not isinstance(decoded[key], dict):
            raise ContextParamError(f"'{key}' must be an object")
    return decoded


def encode_context_param(params: dict) -> str:
    """Inverse of decode_context_param (handy for tests and study links)."""
    raw = json.dumps(params, separators=(",", ":")).encode("utf-8")
    return base64.urlsafe_b64encode(raw).decode("ascii").rstrip("=")
