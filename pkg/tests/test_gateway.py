import asyncio
import json

import httpx
import pytest

from epibrief.config import DATA_DIR
from epibrief.errors import (
    ConfigError,
    ParseError,
    ProviderUnreachableError,
    ScriptExhaustedError,
)
from epibrief.gateway import (
    FIXED_TEMPERATURE,
    ModelConfig,
    OpenAIGateway,
    ScriptedGateway,
    load_scenario,
    load_scenarios,
    load_script,
)

SCENARIO_DIR = DATA_DIR / "scenarios"
CFG = ModelConfig(model_id="gpt-4o", temperature=0.1)


class TestModelConfig:
    def test_fixed_temperature_override_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict(
                {"model_id": "o4-mini", "temperature": 0.3, "temperature_fixed": True}
            )

    def test_fixed_temperature_at_fixed_value_accepted(self):
        cfg = ModelConfig.from_dict(
            {"model_id": "o4-mini", "temperature": 1.0, "temperature_fixed": True}
        )
        assert cfg.temperature == FIXED_TEMPERATURE

    def test_temperature_out_of_range(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"model_id": "m", "temperature": 3.5})

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"model_id": "m", "temprature": 0.1})


class TestScenarios:
    def test_shipped_s1(self):
        scenario = load_scenario(SCENARIO_DIR / "s1.json")
        assert scenario.manager.model_id == "gpt-4o"
        assert scenario.manager.temperature == 0.1
        assert {cfg.model_id for cfg in scenario.agents.values()} == {"gpt-4o"}

    def test_shipped_s3_fixed_temperature(self):
        scenario = load_scenario(SCENARIO_DIR / "s3.json")
        assert scenario.manager.temperature == 1.0
        assert scenario.manager.temperature_fixed is True
        assert all(cfg.temperature_fixed for cfg in scenario.agents.values())

    def test_four_shipped_scenarios(self):
        scenarios = load_scenarios(SCENARIO_DIR)
        assert sorted(scenarios) == ["s1", "s2", "s3", "s4"]

    def test_custom_dir_with_one_file(self, tmp_path):
        (tmp_path / "only.json").write_text(
            json.dumps(
                {
                    "name": "only",
                    "manager": {"model_id": "m", "temperature": 0.5},
                    "agents": {"a": {"model_id": "m", "temperature": 0.5}},
                }
            )
        )
        assert list(load_scenarios(tmp_path)) == ["only"]

    def test_empty_dir(self, tmp_path):
        assert load_scenarios(tmp_path) == {}

    def test_out_of_range_temperature_file(self, tmp_path):
        (tmp_path / "bad.json").write_text(
            json.dumps(
                {
                    "name": "bad",
                    "manager": {"model_id": "m", "temperature": 3.5},
                    "agents": {"a": {"model_id": "m", "temperature": 0.5}},
                }
            )
        )
        with pytest.raises(ConfigError):
            load_scenario(tmp_path / "bad.json")

    def test_unparseable_file(self, tmp_path):
        (tmp_path / "bad.json").write_text("{nope")
        with pytest.raises(ParseError):
            load_scenario(tmp_path / "bad.json")


class TestScriptedGateway:
    SCRIPT = {"manager": ["first", "second"], "who_officer": ["only"]}

    def _complete(self, gateway, tag):
        return asyncio.run(gateway.complete(CFG, "sys", [("user", "hi")], role_tag=tag))

    def test_exact_scripted_text_by_call_index(self):
        gw = ScriptedGateway(dict(self.SCRIPT))
        assert self._complete(gw, "manager").response == "first"
        assert self._complete(gw, "manager").response == "second"
        assert self._complete(gw, "who_officer").response == "only"

    def test_same_inputs_same_response_and_usage(self):
        gw1 = ScriptedGateway(dict(self.SCRIPT))
        gw2 = ScriptedGateway(dict(self.SCRIPT))
        e1 = self._complete(gw1, "manager")
        e2 = self._complete(gw2, "manager")
        assert (e1.response, e1.prompt_tokens, e1.completion_tokens) == (
            e2.response,
            e2.prompt_tokens,
            e2.completion_tokens,
        )

    def test_exhaustion_fails_loudly(self):
        gw = ScriptedGateway({"manager": ["once"]})
        self._complete(gw, "manager")
        with pytest.raises(ScriptExhaustedError):
            self._complete(gw, "manager")

    def test_unknown_role_tag_fails_loudly(self):
        gw = ScriptedGateway({})
        with pytest.raises(ScriptExhaustedError):
            self._complete(gw, "nobody")

    def test_invalid_config_rejected_at_call(self):
        gw = ScriptedGateway(dict(self.SCRIPT))
        bad = ModelConfig(model_id="m", temperature=0.3, temperature_fixed=True)
        with pytest.raises(ConfigError):
            asyncio.run(gw.complete(bad, "sys", [("user", "hi")], role_tag="manager"))

    def test_exchange_recorded_per_call(self):
        gw = ScriptedGateway(dict(self.SCRIPT))
        self._complete(gw, "manager")
        self._complete(gw, "who_officer")
        assert [e.role_tag for e in gw.exchanges] == ["manager", "who_officer"]

    def test_shipped_demo_script_loads(self):
        script = load_script(DATA_DIR / "demo_script.json")
        assert set(script) == {"manager", "medical_scientist", "cdc_analyst", "who_officer"}
        assert len(script["manager"]) == 2


class TestGatewayRouting:
    def test_scripted_provider_config_routes_to_scripted_without_force(self):
        from epibrief.gateway import PROVIDER_SCRIPTED, Gateway

        gw = Gateway(scripted=ScriptedGateway({"manager": ["scripted reply"]}))
        scripted_cfg = ModelConfig(
            model_id="demo", temperature=0.1, provider=PROVIDER_SCRIPTED
        )
        exchange = asyncio.run(
            gw.complete(scripted_cfg, "sys", [("user", "hi")], role_tag="manager")
        )
        assert exchange.response == "scripted reply"

    def test_missing_provider_is_config_error(self):
        from epibrief.gateway import Gateway

        gw = Gateway()
        with pytest.raises(ConfigError):
            asyncio.run(gw.complete(CFG, "sys", [("user", "hi")], role_tag="manager"))


class TestOpenAIGateway:
    def test_happy_path_and_usage(self):
        def handler(request):
            body = json.loads(request.content)
            assert body["model"] == "gpt-4o"
            assert body["temperature"] == 0.1
            assert body["messages"][0]["role"] == "system"
            return httpx.Response(
                200,
                json={
                    "choices": [{"message": {"content": "live reply"}}],
                    "usage": {"prompt_tokens": 12, "completion_tokens": 2},
                },
            )

        async def run():
            async with httpx.AsyncClient(transport=httpx.MockTransport(handler)) as client:
                gw = OpenAIGateway(client, "https://llm.example/v1")
                return await gw.complete(CFG, "sys", [("user", "hi")], role_tag="manager")

        exchange = asyncio.run(run())
        assert exchange.response == "live reply"
        assert exchange.prompt_tokens == 12

    def test_transport_error_retried_once_then_raises(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            raise httpx.ConnectError("refused")

        async def run():
            async with httpx.AsyncClient(transport=httpx.MockTransport(handler)) as client:
                gw = OpenAIGateway(client, "https://llm.example/v1")
                await gw.complete(CFG, "sys", [("user", "hi")], role_tag="manager")

        with pytest.raises(ProviderUnreachableError):
            asyncio.run(run())
        assert calls["n"] == 2

    def test_4xx_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(401, text="bad key")

        async def run():
            async with httpx.AsyncClient(transport=httpx.MockTransport(handler)) as client:
                gw = OpenAIGateway(client, "https://llm.example/v1")
                await gw.complete(CFG, "sys", [("user", "hi")], role_tag="manager")

        with pytest.raises(ProviderUnreachableError):
            asyncio.run(run())
        assert calls["n"] == 1
