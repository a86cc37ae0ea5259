"""Uniform chat-completion interface with a deterministic scripted provider.

Two providers share one call shape: an OpenAI-compatible HTTP provider
for live runs (any vendor speaking that wire format works, base URL in
config, API key via environment variable only) and a scripted provider
that replays canned replies for offline runs and tests. Scripted
replies are keyed by (role tag, call index) from a JSON script file
mapping role tags to ordered reply lists; running past the end of a
list fails loudly rather than improvising.

Per-agent model settings come from scenario files. A scenario names the
manager's model plus one model per agent id. Models flagged
``temperature_fixed`` must carry the provider's fixed value (1.0);
loading any other value is a config error, so a fixed-temperature model
can never be silently overridden.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx

from epibrief.errors import (
    ConfigError,
    ParseError,
    ProviderUnreachableError,
    ScriptExhaustedError,
)

PROVIDER_OPENAI = "openai-compatible"
PROVIDER_SCRIPTED = "scripted"
FIXED_TEMPERATURE = 1.0
DEFAULT_MAX_OUTPUT_TOKENS = 4096


@dataclass(frozen=True)
class ModelConfig:
    model_id: str
    temperature: float
    temperature_fixed: bool = False
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    provider: str = PROVIDER_OPENAI

    def validate(self):
        if not self.model_id:
            raise ConfigError("model_id must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError(
                f"temperature {self.temperature} outside [0, 2] for {self.model_id}"
            )
        if self.temperature_fixed and self.temperature != FIXED_TEMPERATURE:
            raise ConfigError(
                f"{self.model_id} has a fixed temperature of {FIXED_TEMPERATURE}; "
                f"got {self.temperature}"
            )
        if self.max_output_tokens <= 0:
            raise ConfigError("max_output_tokens must be positive")
        if self.provider not in (PROVIDER_OPENAI, PROVIDER_SCRIPTED):
            raise ConfigError(f"unknown provider {self.provider!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        if not isinstance(raw, dict) or "model_id" not in raw:
            raise ConfigError(f"model config needs at least model_id, got {raw!r}")
        known = {"model_id", "temperature", "temperature_fixed", "max_output_tokens", "provider"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        cfg = cls(
            model_id=raw["model_id"],
            temperature=float(raw.get("temperature", 1.0)),
            temperature_fixed=bool(raw.get("temperature_fixed", False)),
            max_output_tokens=int(raw.get("max_output_tokens", DEFAULT_MAX_OUTPUT_TOKENS)),
            provider=raw.get("provider", PROVIDER_OPENAI),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class Scenario:
    scenario_id: str
    name: str
    manager: ModelConfig
    agents: dict[str, ModelConfig]


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate one scenario file; the id is the file stem."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "manager" not in raw or "agents" not in raw:
        raise ConfigError(f"scenario {path} needs name/manager/agents")
    agents = raw["agents"]
    if not isinstance(agents, dict) or not agents:
        raise ConfigError(f"scenario {path} has no agent models")
    return Scenario(
        scenario_id=path.stem,
        name=str(raw.get("name", path.stem)),
        manager=ModelConfig.from_dict(raw["manager"]),
        agents={aid: ModelConfig.from_dict(cfg) for aid, cfg in agents.items()},
    )


def load_scenarios(directory: str | Path) -> dict[str, Scenario]:
    """Load every ``*.json`` scenario in a directory, keyed by id."""
    directory = Path(directory)
    scenarios = {}
    for path in sorted(directory.glob("*.json")):
        scenario = load_scenario(path)
        scenarios[scenario.scenario_id] = scenario
    return scenarios


@dataclass
class ChatExchange:
    role_tag: str
    system: str
    messages: list[tuple[str, str]]
    response: str
    prompt_tokens: int
    completion_tokens: int


def load_script(path: str | Path) -> dict[str, list[str]]:
    """Script file: JSON map of role tag to ordered reply texts."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read script {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"script {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("script must be a JSON object of role tag -> replies")
    script: dict[str, list[str]] = {}
    for tag, replies in raw.items():
        if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
            raise ConfigError(f"script entry {tag!r} must be a list of strings")
        script[tag] = list(replies)
    return script


class ScriptedGateway:
    """Replays scripted replies; a pure function of (script, tag, index)."""

    def __init__(self, script: dict[str, list[str]]):
        self._script = script
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()
        self.exchanges: list[ChatExchange] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedGateway":
        return cls(load_script(path))

    async def complete(
        self,
        config: ModelConfig,
        system: str,
        messages: list[tuple[str, str]],
        role_tag: str,
    ) -> ChatExchange:
        config.validate()
        if not messages:
            raise ValueError("messages must be non-empty")
        with self._lock:
            index = self._counters.get(role_tag, 0)
            self._counters[role_tag] = index + 1
        replies = self._script.get(role_tag, [])
        if index >= len(replies):
            raise ScriptExhaustedError(
                f"no scripted reply for role {role_tag!r} call {index} "
                f"({len(replies)} available)"
            )
        response = replies[index]
        exchange = ChatExchange(
            role_tag=role_tag,
            system=system,
            messages=list(messages),
            response=response,
            prompt_tokens=len(system.split()) + sum(len(t.split()) for _, t in messages),
            completion_tokens=len(response.split()),
        )
        self.exchanges.append(exchange)
        return exchange


class OpenAIGateway:
    """Live provider speaking the OpenAI-compatible chat-completions shape."""

    def __init__(
        self,
        client: httpx.AsyncClient,
        base_url: str,
        api_key_env: str = "OPENAI_API_KEY",
    ):
        self._client = client
        self._base_url = base_url.rstrip("/")
        self._api_key_env = api_key_env
        self.exchanges: list[ChatExchange] = []

    async def complete(
        self,
        config: ModelConfig,
        system: str,
        messages: list[tuple[str, str]],
        role_tag: str,
    ) -> ChatExchange:
        config.validate()
        if not messages:
            raise ValueError("messages must be non-empty")
        api_key = os.environ.get(self._api_key_env, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        payload = {
            "model": config.model_id,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "messages": [{"role": "system", "content": system}]
            + [{"role": role, "content": text} for role, text in messages],
        }
        url = f"{self._base_url}/chat/completions"
        resp = None
        for attempt in (0, 1):
            try:
                resp = await self._client.post(url, json=payload, headers=headers)
                break
            except httpx.TransportError as exc:
                if attempt:
                    raise ProviderUnreachableError(f"provider unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderUnreachableError(
                f"provider returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            body = resp.json()
            response = body["choices"][0]["message"]["content"]
            usage = body.get("usage") or {}
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise ProviderUnreachableError(f"unexpected provider reply: {exc}") from exc
        exchange = ChatExchange(
            role_tag=role_tag,
            system=system,
            messages=list(messages),
            response=response,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )
        self.exchanges.append(exchange)
        return exchange


@dataclass
class Gateway:
    """Routes each call to the provider named by the model config.

    With ``force_scripted`` set (mock mode) every call goes to the
    scripted provider regardless of the config's provider field.
    """

    live: OpenAIGateway | None = None
    scripted: ScriptedGateway | None = None
    force_scripted: bool = False

    async def complete(
        self,
        config: ModelConfig,
        system: str,
        messages: list[tuple[str, str]],
        role_tag: str,
    ) -> ChatExchange:
        if self.force_scripted or config.provider == PROVIDER_SCRIPTED:
            if self.scripted is None:
                raise ConfigError("no scripted provider configured")
            return await self.scripted.complete(config, system, messages, role_tag)
        if self.live is None:
            raise ConfigError("no live provider configured")
        return await self.live.complete(config, system, messages, role_tag)

    @property
    def exchanges(self) -> list[ChatExchange]:
        out: list[ChatExchange] = []
        if self.scripted is not None:
            out.extend(self.scripted.exchanges)
        if self.live is not None:
            out.extend(self.live.exchanges)
        return out
