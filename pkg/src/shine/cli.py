"""shinectl: validate scenarios, serve studies, run headless bots, export logs.

Exit codes: 0 success, 1 validation/assertion failures, 2 I/O or parse errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
import threading
from pathlib import Path

from shine.errors import ShineError, UnknownSessionError
from shine.scenario.compiler import compile_scenario
from shine.scenario.parser import parse_scenario
from shine.scenario.validator import validate_scenario
from shine.scenario.types import DeliveryMode

logger = logging.getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ShineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shinectl", description=__doc__)
    sub = parser.add_subparsers(required=True, dest="command")

    p_validate = sub.add_parser("validate", help="validate a scenario file")
    p_validate.add_argument("path")
    p_validate.add_argument("--json", action="store_true", help="print the report as JSON")
    p_validate.set_defaults(handler=cmd_validate)

    p_serve = sub.add_parser("serve", help="run the study service")
    p_serve.add_argument("--scenario-dir", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000, help="0 picks a free port")
    p_serve.add_argument("--storage", choices=("memory", "docstore"), default="memory")
    p_serve.add_argument("--storage-url", default=None, help="docstore directory")
    p_serve.add_argument("--expiry-s", type=float, default=3600)
    p_serve.set_defaults(handler=cmd_serve)

    p_sim = sub.add_parser("simulate", help="run a bot script headlessly")
    p_sim.add_argument("scenario")
    p_sim.add_argument("bot")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--mode", choices=[m.value for m in DeliveryMode], default=None)
    p_sim.add_argument("--out", default=None, help="write the session log here")
    p_sim.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_sim.add_argument("--via-network", action="store_true", help="run through a real server instead of in-process")
    p_sim.set_defaults(handler=cmd_simulate)

    p_export = sub.add_parser("export", help="export a stored session log")
    p_export.add_argument("session_id")
    p_export.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p_export.add_argument("--storage", choices=("memory", "docstore"), default=None, help="defaults to SHINE_STORAGE")
    p_export.add_argument("--storage-url", default=None, help="defaults to SHINE_STORAGE_URL")
    p_export.add_argument("--out", default=None, help="output file (default stdout)")
    p_export.set_defaults(handler=cmd_export)

    return parser


def cmd_validate(args) -> int:
    path = Path(args.path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return 2
    try:
        spec = parse_scenario(data)
    except ShineError as exc:
        if args.json:
            print(json.dumps({"ok": False, "issues": [{"severity": "error", "path": getattr(exc, "path", ""), "message": str(exc)}]}))
        else:
            print(f"parse error: {exc}", file=sys.stderr)
        return 2
    report = validate_scenario(spec)
    if args.json:
        print(json.dumps(report.to_json_obj(), indent=2))
    else:
        for issue in report.issues:
            print(f"{issue.severity}: {issue.path}: {issue.message}")
        print("ok" if report.ok else f"invalid: {len(report.errors())} error(s)")
    return 0 if report.ok else 1


def cmd_serve(args) -> int:
    import uvicorn

    from shine.service.app import create_app, load_scenario_dir
    from shine.storage.drivers import storage_from_env

    scenarios, warnings = load_scenario_dir(args.scenario_dir)
    for warning in warnings:
        logger.warning("skipping scenario %s", warning)
    if not scenarios:
        print("error: no valid scenarios in directory", file=sys.stderr)
        return 2
    env = {"SHINE_STORAGE": args.storage}
    if args.storage_url:
        env["SHINE_STORAGE_URL"] = args.storage_url
    try:
        storage = storage_from_env(env)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    app = create_app(scenarios, storage, expiry_s=args.expiry_s)

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 2
    sock.listen(128)  # accept (and queue) connections before uvicorn takes over
    actual_port = sock.getsockname()[1]
    print(f"serving {len(scenarios)} scenario(s) on http://{args.host}:{actual_port}", flush=True)
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning"))
    server.run(sockets=[sock])
    return 0


def cmd_simulate(args) -> int:
    from shine.bot import BotRunFailure, parse_bot_script, run_bot, run_bot_via_network
    from shine.storage.export import export_csv, export_jsonl

    try:
        scenario_data = Path(args.scenario).read_bytes()
        bot_data = Path(args.bot).read_bytes()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        spec = parse_scenario(scenario_data)
        report = validate_scenario(spec)
        if not report.ok:
            first = report.errors()[0]
            print(f"error: scenario invalid: {first.path}: {first.message}", file=sys.stderr)
            return 2
        compiled = compile_scenario(spec)
        script = parse_bot_script(bot_data)
    except ShineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    mode = DeliveryMode(args.mode) if args.mode else None
    try:
        if args.via_network:
            result = _simulate_via_network(compiled, script, args.seed, mode)
        else:
            result = run_bot(compiled, script, seed=args.seed, mode=mode)
    except BotRunFailure as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1

    print(json.dumps(result.snapshot, indent=2, sort_keys=True))
    if args.out and result.events:
        data = export_jsonl(result.events) if args.format == "jsonl" else export_csv(result.events)
        Path(args.out).write_bytes(data)
        print(f"log written to {args.out} ({len(result.events)} events)", file=sys.stderr)
    return 0


def _simulate_via_network(compiled, script, seed, mode):
    """Spin up a real server on a free port and drive the script through it."""
    import uvicorn

    from shine.bot import run_bot_via_network
    from shine.service.app import create_app
    from shine.storage.drivers import MemoryDriver
    import httpx

    storage = MemoryDriver()
    app = create_app({compiled.id: compiled}, storage)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, log_level="error"))
    thread = threading.Thread(target=server.run, kwargs={"sockets": [sock]}, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            httpx.get(f"{base}/api/scenarios", timeout=1)
            break
        except httpx.HTTPError:
            import time

            time.sleep(0.05)
    try:
        result = run_bot_via_network(base, compiled.id, script, seed=seed, mode=mode)
        result.events = storage.read_session(result.session_id)
        return result
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def cmd_export(args) -> int:
    from shine.storage.drivers import storage_from_env
    from shine.storage.export import export_session

    env = {}
    if args.storage:
        env["SHINE_STORAGE"] = args.storage
    if args.storage_url:
        env["SHINE_STORAGE_URL"] = args.storage_url
    if not env:
        env = None
    try:
        storage = storage_from_env(env)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        data = export_session(storage, args.session_id, args.format)
    except UnknownSessionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


if __name__ == "__main__":
    sys.exit(main())
