"""Headless operation: run investigations, replay logs, list scenarios, serve.

``ask`` streams human-readable event lines to stderr and writes the
briefing markdown to stdout (or ``--out``, which also writes the JSON
metrics sidecar next to it), so output is pipeable. Exit codes: 0 on a
completed investigation, 1 on failure, 2 on usage errors such as an
unknown scenario. Under ``--mock`` a repeated ``ask`` is fully
deterministic: the session id derives from (scenario, query), so two
runs differ only in timestamps.
"""

from __future__ import annotations

import argparse
import asyncio
import hashlib
import json
import sys
from pathlib import Path

from epibrief import __version__
from epibrief.config import load_config
from epibrief.errors import EpibriefError
from epibrief.events import (
    KIND_BRIEFING,
    StreamEvent,
    load_transcript,
    normalize_timestamps,
    serialize_sse,
    validate_sequence,
)
from epibrief.report import briefing_markdown, briefing_sidecar
from epibrief.runtime import build_runtime


def format_event_line(e: StreamEvent) -> str:
    """One terse line per event for the terminal."""
    if e.kind == KIND_BRIEFING:
        detail = f"{e.payload['metrics']['words']} words, {e.payload['metrics']['source_count']} sources"
    elif "text" in e.payload:
        detail = e.payload["text"]
    elif "note" in e.payload:
        detail = e.payload["note"]
    elif "instruction" in e.payload:
        detail = e.payload["instruction"]
    elif "tool" in e.payload:
        detail = f"{e.payload['tool']} {e.payload.get('status', '')}".strip()
    elif "summary" in e.payload:
        detail = e.payload["summary"]
    elif "sources" in e.payload:
        detail = f"{len(e.payload['sources'])} sources"
    elif "intent" in e.payload:
        detail = e.payload["intent"]
    else:
        detail = e.payload.get("message", "")
    detail = " ".join(detail.split())
    if len(detail) > 100:
        detail = detail[:97] + "..."
    agent = e.agent_id or "-"
    return f"[{e.seq:>3}] {e.kind:<17} {agent:<18} {detail}"


def _load_runtime(args) -> "tuple | int":
    try:
        config = load_config(args.config)
    except EpibriefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if getattr(args, "mock", False):
        from dataclasses import replace

        config = replace(config, mock=True)
    try:
        runtime = build_runtime(config)
    except EpibriefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return config, runtime


def cmd_ask(args) -> int:
    loaded = _load_runtime(args)
    if isinstance(loaded, int):
        return loaded
    config, runtime = loaded
    orch = runtime.orchestrator
    if args.scenario not in orch.scenarios:
        print(f"error: unknown scenario: {args.scenario}", file=sys.stderr)
        return 2

    def stderr_sink(e: StreamEvent):
        print(format_event_line(e), file=sys.stderr)

    digest = hashlib.sha256(f"{args.scenario}\n{args.query.strip()}".encode()).hexdigest()
    session_id = f"cli-{digest[:12]}"

    async def run():
        try:
            return await orch.run_investigation(
                args.query, args.scenario, sinks=[stderr_sink], session_id=session_id
            )
        finally:
            await runtime.aclose()

    try:
        briefing = asyncio.run(run())
    except EpibriefError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    markdown = briefing_markdown(briefing)
    if args.out:
        out = Path(args.out)
        out.write_text(markdown, encoding="utf-8")
        sidecar = out.with_suffix(".json")
        sidecar.write_text(
            json.dumps(briefing_sidecar(briefing), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        print(f"briefing written to {out} (sidecar {sidecar})", file=sys.stderr)
    else:
        sys.stdout.write(markdown)
    return 0


def cmd_replay(args) -> int:
    path = Path(args.session_file)
    if not path.exists():
        print(f"error: no such session file: {path}", file=sys.stderr)
        return 2
    try:
        events = load_transcript(path.read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        print(f"error: unreadable session log: {exc}", file=sys.stderr)
        return 1
    violation = validate_sequence(events)
    if violation is not None:
        print(f"invalid trace: {violation}", file=sys.stderr)
        return 1
    for event in normalize_timestamps(events):
        sys.stdout.write(serialize_sse(event))
    return 0


def cmd_scenarios(args) -> int:
    loaded = _load_runtime(args)
    if isinstance(loaded, int):
        return loaded
    _, runtime = loaded
    for sid, scenario in sorted(runtime.orchestrator.scenarios.items()):
        agents = ", ".join(
            f"{aid}={cfg.model_id}" for aid, cfg in sorted(scenario.agents.items())
        )
        fixed = " (fixed)" if scenario.manager.temperature_fixed else ""
        print(
            f"{sid}  {scenario.name}\n"
            f"    manager={scenario.manager.model_id} temp={scenario.manager.temperature}{fixed}\n"
            f"    agents: {agents}"
        )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from epibrief.service.app import create_app

    loaded = _load_runtime(args)
    if isinstance(loaded, int):
        return loaded
    config, runtime = loaded
    app = create_app(config, runtime)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epibrief",
        description="Multi-agent epidemiological surveillance briefings.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="run one investigation")
    ask.add_argument("query", help="the analyst's question")
    ask.add_argument("--scenario", default="s1", help="scenario id (default: s1)")
    ask.add_argument("--mock", action="store_true", help="scripted gateway + fixture tools")
    ask.add_argument("--out", help="write briefing markdown here (plus .json sidecar)")
    ask.add_argument("--config", help="JSON config file")
    ask.set_defaults(func=cmd_ask)

    replay = sub.add_parser("replay", help="re-serialize a stored session log")
    replay.add_argument("session_file", help="NDJSON event log")
    replay.set_defaults(func=cmd_replay)

    scenarios = sub.add_parser("scenarios", help="list loaded scenarios")
    scenarios.add_argument("--config", help="JSON config file")
    scenarios.set_defaults(func=cmd_scenarios)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", help="JSON config file")
    serve.add_argument("--mock", action="store_true", help="scripted gateway + fixture tools")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
