"""Session hosting: REST + WebSocket endpoints, registry, event routing."""

from shine.service.protocol import decode_context_param, make_client_event, make_server_event
from shine.service.registry import SessionRegistry
from shine.service.runtime import SessionRuntime, headless_wall_clock, live_wall_clock

__all__ = [
    "SessionRegistry",
    "SessionRuntime",
    "decode_context_param",
    "headless_wall_clock",
    "live_wall_clock",
    "make_client_event",
    "make_server_event",
]
