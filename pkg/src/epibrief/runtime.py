"""Runtime assembly: config in, ready-to-run orchestrator out.

Mock mode wires the scripted gateway (a fresh script cursor per
investigation, so every session replays the same conversation) and the
fixture transport. Live mode shares one HTTP client and one
OpenAI-compatible gateway across sessions, with the NCBI rate limiter
attached to the PubMed tool.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import httpx

from epibrief.agents import load_roster, validate_tool_grants
from epibrief.config import AppConfig, load_prompts
from epibrief.gateway import (
    Gateway,
    OpenAIGateway,
    ScriptedGateway,
    load_scenarios,
    load_script,
)
from epibrief.offline import build_fixture_transport
from epibrief.orchestrator import Orchestrator
from epibrief.sources.pubmed_bioc import (
    KEYED_RATE_PER_SEC,
    KEYLESS_RATE_PER_SEC,
    TokenBucket,
)
from epibrief.tools import build_tools


@dataclass
class Runtime:
    config: AppConfig
    orchestrator: Orchestrator
    client: httpx.AsyncClient

    async def aclose(self):
        await self.client.aclose()


def build_runtime(config: AppConfig) -> Runtime:
    scenarios = load_scenarios(config.scenario_dir)
    roster = load_roster(config.roster_path)
    prompts = load_prompts(config.prompts_path)

    if config.mock:
        client = httpx.AsyncClient(transport=build_fixture_transport(config))
        script = load_script(config.script_path)
        limiter = None

        def gateway_factory() -> Gateway:
            return Gateway(scripted=ScriptedGateway(dict(script)), force_scripted=True)

    else:
        client = httpx.AsyncClient(timeout=30.0)
        live = OpenAIGateway(
            client, config.provider.base_url, api_key_env=config.provider.api_key_env
        )
        rate = (
            KEYED_RATE_PER_SEC
            if os.environ.get(config.pubmed.api_key_env)
            else KEYLESS_RATE_PER_SEC
        )
        limiter = TokenBucket(rate)
        script_path = config.script_path

        def gateway_factory() -> Gateway:
            return Gateway(
                live=live,
                scripted=ScriptedGateway.from_file(script_path) if script_path.exists() else None,
            )

    tools = build_tools(config, client, limiter)
    validate_tool_grants(roster, tools)
    orchestrator = Orchestrator(
        roster=roster,
        scenarios=scenarios,
        tools=tools,
        gateway_factory=gateway_factory,
        prompts=prompts,
        subtask_timeout=config.subtask_timeout,
    )
    return Runtime(config=config, orchestrator=orchestrator, client=client)
