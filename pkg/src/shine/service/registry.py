"""Session registry: concurrent create/lookup, live-clock ticks, expiry."""

from __future__ import annotations

import logging
import threading
import time
import uuid
from typing import Callable

from shine.errors import UnknownSessionError
from shine.explain.external import ExternalEngineClient
from shine.scenario.compiler import CompiledScenario
from shine.scenario.types import DeliveryMode
from shine.service.protocol import decode_context_param
from shine.service.runtime import SessionRuntime, live_wall_clock

logger = logging.getLogger(__name__)

SCHEDULER_RESOLUTION_S = 0.25
DEFAULT_EXPIRY_S = 60 * 60


class SessionRegistry:
    """Registry plus the single scheduler thread that drives live sessions'
    virtual clocks and expires abandoned ones."""

    def __init__(
        self,
        scenarios: dict[str, CompiledScenario],
        storage,
        expiry_s: float = DEFAULT_EXPIRY_S,
        external_client_factory: Callable[[CompiledScenario], ExternalEngineClient | None] | None = None,
    ):
        self.scenarios = scenarios
        self.storage = storage
        self.expiry_s = expiry_s
        self.external_client_factory = external_client_factory
        self._sessions: dict[str, SessionRuntime] = {}
        self._lock = threading.Lock()
        self._scheduler: threading.Thread | None = None
        self._stop = threading.Event()

    # -- lifecycle -----------------------------------------------------------------

    def create_session(self, scenario_id: str, participant_id: str, context_param: str | None = None) -> SessionRuntime:
        """Create and start a live session.

        Raises KeyError for unknown scenarios, ContextParamError for
        malformed parameters, InteractionError for out-of-domain context
        values.
        """
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise KeyError(scenario_id)
        params = decode_context_param(context_param)
        context_vars = params.get("contextVars", {})
        user_context = params.get("userContext", {})
        mode = DeliveryMode(params["deliveryMode"]) if "deliveryMode" in params else None

        session_id = uuid.uuid4().hex
        started_monotonic = time.monotonic()
        external = self.external_client_factory(scenario) if self.external_client_factory else None
        runtime = SessionRuntime(
            session_id=session_id,
            scenario=scenario,
            storage=self.storage,
            participant_id=participant_id,
            delivery_mode=mode,
            context_vars=context_vars,
            user_context=user_context,
            external_client=external,
            wall_clock=live_wall_clock,
            clock_source=lambda: int((time.monotonic() - started_monotonic) * 1000),
        )
        runtime.last_activity_wall_s = time.time()
        with self._lock:
            self._sessions[session_id] = runtime
        self.storage.put_session(self._record(runtime))
        runtime.start()
        logger.info("session %s created for scenario %s (mode=%s)", session_id, scenario_id, runtime.delivery_mode.value)
        return runtime

    def _record(self, runtime: SessionRuntime) -> dict:
        return {
            "sessionId": runtime.session_id,
            "scenarioId": runtime.scenario.id,
            "participantId": runtime.participant_id,
            "status": runtime.status,
            "deliveryMode": runtime.delivery_mode.value,
            "createdAt": runtime.created_wall,
            "userContext": dict(runtime.user_context),
            "contextVars": dict(runtime.context_vars),
        }

    def get(self, session_id: str) -> SessionRuntime:
        with self._lock:
            runtime = self._sessions.get(session_id)
        if runtime is None:
            raise UnknownSessionError(f"unknown session '{session_id}'")
        return runtime

    def touch(self, session_id: str) -> None:
        with self._lock:
            runtime = self._sessions.get(session_id)
        if runtime is not None:
            runtime.last_activity_wall_s = time.time()

    def update_record(self, runtime: SessionRuntime) -> None:
        self.storage.put_session(self._record(runtime))

    def active_sessions(self) -> list[SessionRuntime]:
        with self._lock:
            return [r for r in self._sessions.values() if r.status == "active"]

    # -- scheduler ---------------------------------------------------------------------

    def start_scheduler(self) -> None:
        if self._scheduler is not None:
            return
        self._stop.clear()
        self._scheduler = threading.Thread(target=self._run_scheduler, name="shine-scheduler", daemon=True)
        self._scheduler.start()

    def stop_scheduler(self) -> None:
        self._stop.set()
        if self._scheduler is not None:
            self._scheduler.join(timeout=2)
            self._scheduler = None

    def _run_scheduler(self) -> None:
        while not self._stop.wait(SCHEDULER_RESOLUTION_S):
            self.tick()

    def tick(self, now_s: float | None = None) -> None:
        """One scheduler pass: advance live clocks, expire idle sessions."""
        now_s = time.time() if now_s is None else now_s
        for runtime in self.active_sessions():
            try:
                if runtime.clock_source is not None:
                    runtime.advance_virtual(runtime.clock_source())
                last = runtime.last_activity_wall_s
                if last is not None and now_s - last > self.expiry_s:
                    logger.info("session %s expired after inactivity", runtime.session_id)
                    runtime.expire()
                    self.update_record(runtime)
            except Exception:  # keep the scheduler alive; sessions are independent
                logger.exception("scheduler pass failed for session %s", runtime.session_id)
