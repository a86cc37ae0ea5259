"""Application configuration: endpoints, directories, prompt templates.

Everything the service or CLI needs at runtime has a shipped default
under the package's ``data/`` directory; a JSON config file overrides
individual keys. Prompts are data, not code: the decomposition and
synthesis instructions live in a versioned template file so they can be
tuned without a release.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from epibrief.errors import ConfigError, ParseError
from epibrief.sources.who_dons import DEFAULT_ENDPOINT as WHO_DEFAULT_ENDPOINT
from epibrief.sources.who_dons import DonsFields
from epibrief.sources.pubmed_bioc import (
    DEFAULT_BIOC_URL_TEMPLATE,
    DEFAULT_ESEARCH_URL,
)

DATA_DIR = Path(__file__).parent / "data"

DEFAULT_SUBTASK_TIMEOUT = 60.0


@dataclass(frozen=True)
class WhoConfig:
    endpoint: str = WHO_DEFAULT_ENDPOINT
    fields: DonsFields = field(default_factory=DonsFields)
    top: int = 10
    summary_chars: int = 280


@dataclass(frozen=True)
class WonderConfig:
    endpoints: dict = field(
        default_factory=lambda: {"D76": "https://wonder.cdc.gov/controller/datarequest/D76"}
    )
    default_dataset: str = "D76"
    # All-cause deaths grouped by year for the most recent years; a
    # fixture choice for the shipped default query, not a data claim.
    default_parameters: dict = field(
        default_factory=lambda: {
            "B_1": ["D76.V1-level1"],
            "M_1": ["D76.M1"],
            "F_V1": ["*All*"],
        }
    )
    columns: tuple = ("Year", "Deaths")
    dataset_page: str = "https://wonder.cdc.gov/ucd-icd10.html"
    max_rows: int = 12


@dataclass(frozen=True)
class PubMedConfig:
    esearch_url: str = DEFAULT_ESEARCH_URL
    bioc_url_template: str = DEFAULT_BIOC_URL_TEMPLATE
    api_key_env: str = "NCBI_API_KEY"
    max_search_results: int = 10
    fetch_documents: int = 3
    snippet_chars: int = 240


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"


@dataclass(frozen=True)
class AppConfig:
    data_dir: Path = Path("./sessions")
    scenario_dir: Path = DATA_DIR / "scenarios"
    roster_path: Path = DATA_DIR / "roster.json"
    prompts_path: Path = DATA_DIR / "prompts.json"
    script_path: Path = DATA_DIR / "demo_script.json"
    mock: bool = False
    subtask_timeout: float = DEFAULT_SUBTASK_TIMEOUT
    who: WhoConfig = field(default_factory=WhoConfig)
    wonder: WonderConfig = field(default_factory=WonderConfig)
    pubmed: PubMedConfig = field(default_factory=PubMedConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    webui_dir: Path | None = None


_TOP_LEVEL_KEYS = {
    "data_dir",
    "scenario_dir",
    "roster_path",
    "prompts_path",
    "script_path",
    "mock",
    "subtask_timeout",
    "who",
    "wonder",
    "pubmed",
    "provider",
    "webui_dir",
}


def load_config(path: str | Path | None = None) -> AppConfig:
    """Defaults, optionally overridden by a JSON file."""
    config = AppConfig()
    if path is None:
        return config
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}") from exc
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    updates: dict = {}
    for key in ("data_dir", "scenario_dir", "roster_path", "prompts_path", "script_path", "webui_dir"):
        if key in raw:
            updates[key] = Path(raw[key])
    if "mock" in raw:
        updates["mock"] = bool(raw["mock"])
    if "subtask_timeout" in raw:
        updates["subtask_timeout"] = float(raw["subtask_timeout"])
    if "who" in raw:
        who = raw["who"]
        fields = DonsFields(**who["fields"]) if "fields" in who else DonsFields()
        updates["who"] = WhoConfig(
            endpoint=who.get("endpoint", WHO_DEFAULT_ENDPOINT),
            fields=fields,
            top=int(who.get("top", 10)),
            summary_chars=int(who.get("summary_chars", 280)),
        )
    if "wonder" in raw:
        base = WonderConfig()
        w = raw["wonder"]
        updates["wonder"] = WonderConfig(
            endpoints=w.get("endpoints", base.endpoints),
            default_dataset=w.get("default_dataset", base.default_dataset),
            default_parameters=w.get("default_parameters", base.default_parameters),
            columns=tuple(w.get("columns", base.columns)),
            dataset_page=w.get("dataset_page", base.dataset_page),
            max_rows=int(w.get("max_rows", base.max_rows)),
        )
    if "pubmed" in raw:
        base = PubMedConfig()
        p = raw["pubmed"]
        updates["pubmed"] = PubMedConfig(
            esearch_url=p.get("esearch_url", base.esearch_url),
            bioc_url_template=p.get("bioc_url_template", base.bioc_url_template),
            api_key_env=p.get("api_key_env", base.api_key_env),
            max_search_results=int(p.get("max_search_results", base.max_search_results)),
            fetch_documents=int(p.get("fetch_documents", base.fetch_documents)),
            snippet_chars=int(p.get("snippet_chars", base.snippet_chars)),
        )
    if "provider" in raw:
        base = ProviderConfig()
        updates["provider"] = ProviderConfig(
            base_url=raw["provider"].get("base_url", base.base_url),
            api_key_env=raw["provider"].get("api_key_env", base.api_key_env),
        )
    return replace(config, **updates)


@dataclass(frozen=True)
class PromptLibrary:
    version: int
    decompose_system: str
    decompose_user: str
    agent_system: str
    agent_user: str
    synthesize_system: str
    synthesize_user: str


def load_prompts(path: str | Path) -> PromptLibrary:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read prompts {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"prompts {path} is not valid JSON: {exc}") from exc
    required = {
        "version",
        "decompose_system",
        "decompose_user",
        "agent_system",
        "agent_user",
        "synthesize_system",
        "synthesize_user",
    }
    missing = required - set(raw)
    if missing:
        raise ConfigError(f"prompt file missing templates: {sorted(missing)}")
    return PromptLibrary(
        version=int(raw["version"]),
        decompose_system=raw["decompose_system"],
        decompose_user=raw["decompose_user"],
        agent_system=raw["agent_system"],
        agent_user=raw["agent_user"],
        synthesize_system=raw["synthesize_system"],
        synthesize_user=raw["synthesize_user"],
    )
