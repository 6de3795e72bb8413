"""External explanation engine client.

One request/response exchange per explanation over the configured transport
(HTTP POST, or a single WebSocket request frame answered by one response
frame with the identical payloads). Every failure mode, timeout, transport
error, malformed or empty response, degrades to the spec's fallback
template; nothing surfaces to the participant.
"""

from __future__ import annotations

import json
import logging
from typing import Callable

from shine.scenario.types import EngineEndpoint

logger = logging.getLogger(__name__)

# A transport takes (url, request payload, timeout seconds) and returns the
# decoded response object; it may raise TimeoutError or ConnectionError.
Transport = Callable[[str, dict, float], dict]


def rest_transport(url: str, request: dict, timeout_s: float) -> dict:
    import httpx

    try:
        response = httpx.post(url, json=request, timeout=timeout_s)
        response.raise_for_status()
        return response.json()
    except httpx.TimeoutException as exc:
        raise TimeoutError(str(exc)) from exc
    except httpx.HTTPError as exc:
        raise ConnectionError(str(exc)) from exc


def websocket_transport(url: str, request: dict, timeout_s: float) -> dict:
    from websockets.sync.client import connect

    try:
        with connect(url, open_timeout=timeout_s, close_timeout=timeout_s) as socket:
            socket.send(json.dumps(request))
            raw = socket.recv(timeout=timeout_s)
        return json.loads(raw)
    except TimeoutError:
        raise
    except Exception as exc:  # connection refused, protocol errors, bad JSON
        raise ConnectionError(str(exc)) from exc


class ExternalEngineClient:
    """Fetches explanation text from a configured engine with a hard timeout."""

    def __init__(self, endpoint: EngineEndpoint, timeout_ms: int = 2000, transport: Transport | None = None):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        if transport is not None:
            self._transport = transport
        elif endpoint.transport == "websocket":
            self._transport = websocket_transport
        else:
            self._transport = rest_transport

    def fetch(self, request: dict) -> tuple[str | None, str | None]:
        """Returns (text, None) on success or (None, reason) on degradation;
        reason is one of timeout, transport_error, bad_response, empty_text."""
        try:
            response = self._transport(self.endpoint.url, request, self.timeout_ms / 1000.0)
        except TimeoutError:
            logger.warning("external engine timed out after %d ms", self.timeout_ms)
            return None, "timeout"
        except (ConnectionError, OSError) as exc:
            logger.warning("external engine transport error: %s", exc)
            return None, "transport_error"
        if not isinstance(response, dict) or not isinstance(response.get("text"), str):
            logger.warning("external engine returned a malformed response")
            return None, "bad_response"
        text = response["text"]
        if not text:
            return None, "empty_text"
        return text, None
