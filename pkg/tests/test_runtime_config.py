import asyncio
import json
from dataclasses import replace

import httpx
import pytest

from epibrief.agents import load_roster, validate_tool_grants
from epibrief.config import AppConfig, DATA_DIR, load_config, load_prompts
from epibrief.errors import ConfigError, ParseError
from epibrief.offline import (
    ROUTE_PUBMED_BIOC,
    ROUTE_PUBMED_SEARCH,
    ROUTE_WHO,
    ROUTE_WONDER,
    build_fixture_transport,
    classify_route,
)
from epibrief.runtime import build_runtime


class TestLoadConfig:
    def test_defaults_without_file(self):
        config = load_config(None)
        assert config.mock is False
        assert config.scenario_dir == DATA_DIR / "scenarios"

    def test_section_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(
            json.dumps(
                {
                    "mock": True,
                    "data_dir": str(tmp_path / "sessions"),
                    "subtask_timeout": 12.5,
                    "who": {"endpoint": "https://who.test/api", "top": 3},
                    "wonder": {
                        "endpoints": {"D76": "https://wonder.test/D76"},
                        "columns": ["Year", "Count"],
                    },
                    "pubmed": {"max_search_results": 4, "fetch_documents": 2},
                    "provider": {"base_url": "https://llm.test/v1"},
                }
            )
        )
        config = load_config(path)
        assert config.mock is True
        assert config.subtask_timeout == 12.5
        assert config.who.endpoint == "https://who.test/api"
        assert config.who.top == 3
        assert config.wonder.endpoints == {"D76": "https://wonder.test/D76"}
        assert config.wonder.columns == ("Year", "Count")
        assert config.pubmed.max_search_results == 4
        assert config.provider.base_url == "https://llm.test/v1"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text('{"scenariodir": "x"}')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{")
        with pytest.raises(ParseError):
            load_config(path)


class TestLoadPrompts:
    def test_shipped_prompts(self):
        prompts = load_prompts(DATA_DIR / "prompts.json")
        assert prompts.version == 1
        assert "{query}" in prompts.decompose_user
        assert "{evidence}" in prompts.agent_user

    def test_missing_template_rejected(self, tmp_path):
        path = tmp_path / "prompts.json"
        path.write_text(json.dumps({"version": 1, "decompose_system": "x"}))
        with pytest.raises(ConfigError):
            load_prompts(path)


class TestLoadRoster:
    def test_shipped_roster(self):
        roster = load_roster(DATA_DIR / "roster.json")
        assert [p.agent_id for p in roster] == [
            "medical_scientist",
            "cdc_analyst",
            "who_officer",
        ]
        assert all(p.role and p.goal for p in roster)

    def _write(self, tmp_path, entries):
        path = tmp_path / "roster.json"
        path.write_text(json.dumps(entries))
        return path

    def test_duplicate_ids_rejected(self, tmp_path):
        entry = {"agent_id": "a", "role": "R", "goal": "G", "tools": ["who.dons"]}
        with pytest.raises(ConfigError):
            load_roster(self._write(tmp_path, [entry, entry]))

    def test_missing_goal_rejected(self, tmp_path):
        entry = {"agent_id": "a", "role": "R", "goal": "", "tools": ["who.dons"]}
        with pytest.raises(ConfigError):
            load_roster(self._write(tmp_path, [entry]))

    def test_unknown_tool_family_rejected(self, tmp_path):
        entry = {"agent_id": "a", "role": "R", "goal": "G", "tools": ["ecdc.atlas"]}
        with pytest.raises(ConfigError):
            load_roster(self._write(tmp_path, [entry]))

    def test_tool_grants_resolve_against_registry(self):
        roster = load_roster(DATA_DIR / "roster.json")
        with pytest.raises(ConfigError) as exc_info:
            validate_tool_grants(roster, {"who.dons": object()})
        assert "pubmed.literature" in str(exc_info.value)


class TestBuildRuntime:
    def test_mock_runtime_wires_scripted_gateway(self, tmp_path):
        config = replace(AppConfig(), mock=True, data_dir=tmp_path)
        runtime = build_runtime(config)
        gateway = runtime.orchestrator.gateway_factory()
        assert gateway.force_scripted is True
        assert gateway.scripted is not None
        # Fresh script cursor per investigation.
        assert runtime.orchestrator.gateway_factory() is not gateway
        assert set(runtime.orchestrator.tools) == {
            "who.dons",
            "cdc.wonder",
            "pubmed.literature",
        }
        asyncio.run(runtime.aclose())

    def test_live_runtime_wires_shared_live_gateway(self, tmp_path):
        config = replace(AppConfig(), mock=False, data_dir=tmp_path)
        runtime = build_runtime(config)
        g1 = runtime.orchestrator.gateway_factory()
        g2 = runtime.orchestrator.gateway_factory()
        assert g1.live is not None
        assert g1.live is g2.live
        assert g1.force_scripted is False
        asyncio.run(runtime.aclose())


class TestFixtureTransport:
    def _request(self, url):
        return httpx.Request("GET", url)

    def test_route_classification(self):
        config = AppConfig()
        assert classify_route(config, self._request(config.who.endpoint + "?$top=5")) == ROUTE_WHO
        assert (
            classify_route(config, self._request(config.wonder.endpoints["D76"]))
            == ROUTE_WONDER
        )
        assert (
            classify_route(config, self._request(config.pubmed.esearch_url + "?db=pubmed"))
            == ROUTE_PUBMED_SEARCH
        )
        bioc_url = config.pubmed.bioc_url_template.format(doc_id="123")
        assert classify_route(config, self._request(bioc_url)) == ROUTE_PUBMED_BIOC
        assert classify_route(config, self._request("https://elsewhere.example/x")) is None

    def test_unrouted_request_gets_404(self):
        config = AppConfig()

        async def run():
            transport = build_fixture_transport(config)
            async with httpx.AsyncClient(transport=transport) as client:
                return await client.get("https://elsewhere.example/x")

        assert asyncio.run(run()).status_code == 404
