"""REST and WebSocket endpoints of the study service."""

from __future__ import annotations

import asyncio
import json
import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from shine.errors import InteractionError, SessionLifecycleError, ShineError, UnknownSessionError
from shine.scenario.compiler import CompiledScenario, compile_scenario
from shine.scenario.parser import parse_scenario, scenario_to_json_obj
from shine.scenario.validator import validate_scenario
from shine.service.protocol import ContextParamError, make_server_event, validate_client_event, ProtocolViolation
from shine.service.registry import SessionRegistry
from shine.storage.drivers import StorageDriver
from shine.storage.export import export_session

logger = logging.getLogger(__name__)

RESEARCH_TOKEN_ENV = "SHINE_RESEARCH_TOKEN"


def load_scenario_dir(path: str | Path) -> tuple[dict[str, CompiledScenario], list[str]]:
    """Compile every ``*.scenario.json`` under ``path``; invalid files are
    skipped and reported as warnings."""
    scenarios: dict[str, CompiledScenario] = {}
    warnings: list[str] = []
    for file in sorted(Path(path).glob("*.scenario.json")):
        try:
            spec = parse_scenario(file.read_bytes())
        except ShineError as exc:
            warnings.append(f"{file.name}: {exc}")
            continue
        report = validate_scenario(spec)
        if not report.ok:
            first = report.errors()[0]
            warnings.append(f"{file.name}: {first.path}: {first.message}")
            continue
        scenarios[spec.id] = compile_scenario(spec)
    return scenarios, warnings


def create_app(
    scenarios: dict[str, CompiledScenario],
    storage: StorageDriver,
    expiry_s: float = 60 * 60,
    research_token: str | None = None,
    external_client_factory=None,
) -> FastAPI:
    """Build the service around a compiled scenario set and a storage driver."""
    registry = SessionRegistry(
        scenarios, storage, expiry_s=expiry_s, external_client_factory=external_client_factory
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        registry.start_scheduler()
        yield
        registry.stop_scheduler()

    app = FastAPI(title="shine", docs_url=None, redoc_url=None, lifespan=lifespan)
    # the client may be served from a different origin than the service
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])
    app.state.registry = registry
    app.state.storage = storage
    app.state.research_token = research_token

    # -- REST -------------------------------------------------------------------

    @app.get("/api/scenarios")
    async def list_scenarios() -> JSONResponse:
        return JSONResponse(
            [{"id": compiled.id, "name": compiled.spec.name} for compiled in scenarios.values()]
        )

    @app.get("/api/scenarios/{scenario_id}")
    async def get_scenario(scenario_id: str) -> JSONResponse:
        compiled = scenarios.get(scenario_id)
        if compiled is None:
            return _error(404, f"unknown scenario '{scenario_id}'")
        return JSONResponse(scenario_to_json_obj(compiled.spec))

    @app.post("/api/sessions")
    async def create_session(request: Request) -> JSONResponse:
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "request body must be a JSON object")
        if not isinstance(body, dict) or not isinstance(body.get("scenarioId"), str):
            return _error(400, "missing 'scenarioId'")
        participant = body.get("participantId", "anonymous")
        if not isinstance(participant, str):
            return _error(400, "'participantId' must be a string")
        context_param = body.get("context")
        if context_param is not None and not isinstance(context_param, str):
            return _error(400, "'context' must be a base64url string")
        try:
            runtime = await run_in_threadpool(
                registry.create_session, body["scenarioId"], participant, context_param
            )
        except KeyError:
            return _error(404, f"unknown scenario '{body['scenarioId']}'")
        except ContextParamError as exc:
            return _error(400, f"invalid context parameter: {exc}")
        except InteractionError as exc:
            return _error(400, str(exc))
        ws_url = _ws_url(request, runtime.session_id)
        return JSONResponse({"sessionId": runtime.session_id, "wsUrl": ws_url}, status_code=201)

    @app.get("/api/sessions/{session_id}/state")
    async def get_state(session_id: str) -> JSONResponse:
        try:
            runtime = registry.get(session_id)
        except UnknownSessionError as exc:
            return _error(404, str(exc))
        return JSONResponse(await run_in_threadpool(runtime.snapshot_payload))

    @app.post("/api/sessions/{session_id}/complete")
    async def complete_session(session_id: str) -> JSONResponse:
        try:
            runtime = registry.get(session_id)
        except UnknownSessionError as exc:
            return _error(404, str(exc))
        try:
            summary = await run_in_threadpool(runtime.complete)
        except SessionLifecycleError as exc:
            return _error(409, str(exc))
        await run_in_threadpool(registry.update_record, runtime)
        return JSONResponse(summary)

    @app.get("/api/sessions/{session_id}/events")
    async def export_events(session_id: str, request: Request, format: str = "jsonl") -> Response:
        token = research_token if research_token is not None else os.environ.get(RESEARCH_TOKEN_ENV)
        provided = request.headers.get("authorization", "")
        if not token or provided != f"Bearer {token}":
            return _error(403, "research token required")
        if format not in ("jsonl", "csv"):
            return _error(400, f"unknown format '{format}'")
        try:
            data = await run_in_threadpool(export_session, storage, session_id, format)
        except UnknownSessionError as exc:
            return _error(404, str(exc))
        media = "application/x-ndjson" if format == "jsonl" else "text/csv"
        return Response(content=data, media_type=media)

    # -- WebSocket -----------------------------------------------------------------

    @app.websocket("/ws/{session_id}")
    async def session_socket(websocket: WebSocket, session_id: str) -> None:
        try:
            runtime = registry.get(session_id)
        except UnknownSessionError:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()

        def sink(event: dict) -> None:
            loop.call_soon_threadsafe(queue.put_nowait, event)

        runtime.add_sink(sink)

        async def writer() -> None:
            while True:
                event = await queue.get()
                await websocket.send_text(json.dumps(event, separators=(",", ":")))

        writer_task = asyncio.create_task(writer())
        # a (re)connecting client always receives the full snapshot first
        snapshot = await run_in_threadpool(runtime.snapshot_payload)
        sink(make_server_event("state_update", session_id, snapshot["logSeq"], {"snapshot": snapshot}))
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    frame = validate_client_event(json.loads(raw))
                except (json.JSONDecodeError, ProtocolViolation) as exc:
                    await run_in_threadpool(runtime.report_protocol_error, str(exc))
                    continue
                if frame["sessionId"] != session_id:
                    await run_in_threadpool(runtime.report_protocol_error, "sessionId mismatch")
                    continue
                registry.touch(session_id)
                await run_in_threadpool(runtime.handle_client_event, frame)
        except WebSocketDisconnect:
            pass
        finally:
            writer_task.cancel()
            runtime.remove_sink(sink)

    return app


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _ws_url(request: Request, session_id: str) -> str:
    scheme = "wss" if request.url.scheme == "https" else "ws"
    host = request.headers.get("host", request.url.netloc)
    return f"{scheme}://{host}/ws/{session_id}"
