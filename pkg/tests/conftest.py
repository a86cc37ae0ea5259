import asyncio
from dataclasses import replace
from pathlib import Path

import pytest

from epibrief.config import AppConfig
from epibrief.runtime import build_runtime

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"

# A fixed analyst question about the mpox situation; under the scripted
# gateway its text only matters for determinism, not routing.
DEMO_QUERY = "Assess the current mpox clade Ib transmission signal in non-endemic regions."


def golden_bytes(name: str) -> bytes:
    return (GOLDEN / name).read_bytes()


def golden_text(name: str) -> str:
    return (GOLDEN / name).read_text(encoding="utf-8")


@pytest.fixture
def mock_config(tmp_path) -> AppConfig:
    return replace(AppConfig(), mock=True, data_dir=tmp_path / "sessions")


@pytest.fixture
def mock_runtime(mock_config):
    runtime = build_runtime(mock_config)
    yield runtime
    asyncio.run(runtime.aclose())


def run_mock_investigation(runtime, query=DEMO_QUERY, scenario_id="s1", session_id=None):
    """Run one investigation, returning (events, briefing)."""
    events = []
    briefing = asyncio.run(
        runtime.orchestrator.run_investigation(
            query, scenario_id, sinks=[events.append], session_id=session_id
        )
    )
    return events, briefing


def build_mock_orchestrator(
    config=None,
    overrides=None,
    gateway_factory=None,
    subtask_timeout=None,
):
    """Hand-assembled mock orchestrator; ``overrides`` injects transport
    failures per fixture route, ``gateway_factory`` lets tests capture or
    replace the gateway. Returns (orchestrator, client)."""
    import httpx

    from epibrief.agents import load_roster
    from epibrief.config import load_prompts
    from epibrief.gateway import Gateway, ScriptedGateway, load_scenarios, load_script
    from epibrief.offline import build_fixture_transport
    from epibrief.orchestrator import Orchestrator
    from epibrief.tools import build_tools

    config = config or AppConfig()
    client = httpx.AsyncClient(transport=build_fixture_transport(config, overrides=overrides))
    script = load_script(config.script_path)
    if gateway_factory is None:

        def gateway_factory():
            return Gateway(scripted=ScriptedGateway(dict(script)), force_scripted=True)

    orchestrator = Orchestrator(
        roster=load_roster(config.roster_path),
        scenarios=load_scenarios(config.scenario_dir),
        tools=build_tools(config, client),
        gateway_factory=gateway_factory,
        prompts=load_prompts(config.prompts_path),
        subtask_timeout=subtask_timeout or config.subtask_timeout,
    )
    return orchestrator, client


def parse_sse_stream(text: str) -> list[dict]:
    """Minimal SSE parser for tests: returns the data payloads as dicts."""
    import json

    frames = []
    for block in text.split("\n\n"):
        if not block.strip():
            continue
        fields = {}
        for line in block.split("\n"):
            key, _, value = line.partition(": ")
            fields[key] = value
        frames.append(
            {
                "event": fields.get("event"),
                "id": int(fields["id"]) if "id" in fields else None,
                "data": json.loads(fields["data"]) if "data" in fields else None,
            }
        )
    return frames
