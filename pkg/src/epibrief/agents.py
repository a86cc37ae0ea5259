"""Agent roster: personas, tool grants, and task categories.

A profile carries the persona injected into prompts (role, goal,
backstory), the tool identifiers the agent may invoke, and — once a
scenario is bound — the model configuration. The task category is not
free-form: it derives from the agent's tool family (pubmed tools mean
clinical work, cdc statistical, who regulatory), so the manager cannot
mislabel a delegation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from epibrief.errors import ConfigError, ParseError
from epibrief.gateway import ModelConfig, Scenario

CATEGORY_CLINICAL = "Clinical"
CATEGORY_STATISTICAL = "Statistical"
CATEGORY_REGULATORY = "Regulatory"

# Tool-family prefix (before the first '.') to task category.
TOOL_FAMILY_CATEGORIES = {
    "pubmed": CATEGORY_CLINICAL,
    "cdc": CATEGORY_STATISTICAL,
    "who": CATEGORY_REGULATORY,
}


@dataclass(frozen=True)
class AgentProfile:
    agent_id: str
    role: str
    goal: str
    backstory: str
    tools: tuple[str, ...]
    model: ModelConfig | None = None


def category_for(profile: AgentProfile) -> str:
    family = profile.tools[0].split(".", 1)[0]
    return TOOL_FAMILY_CATEGORIES[family]


def load_roster(path: str | Path) -> list[AgentProfile]:
    """Load persona definitions; model configs are bound per scenario."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read roster {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"roster {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise ConfigError("roster must be a non-empty JSON array")
    profiles: list[AgentProfile] = []
    seen: set[str] = set()
    for entry in raw:
        agent_id = entry.get("agent_id", "")
        if not agent_id or agent_id in seen:
            raise ConfigError(f"roster agent ids must be unique and non-empty: {agent_id!r}")
        seen.add(agent_id)
        if not entry.get("role") or not entry.get("goal"):
            raise ConfigError(f"agent {agent_id} needs a non-empty role and goal")
        tools = tuple(entry.get("tools") or ())
        if not tools:
            raise ConfigError(f"agent {agent_id} has no tools")
        profile = AgentProfile(
            agent_id=agent_id,
            role=entry["role"],
            goal=entry["goal"],
            backstory=entry.get("backstory", ""),
            tools=tools,
        )
        try:
            category_for(profile)
        except KeyError as exc:
            raise ConfigError(
                f"agent {agent_id} tool {tools[0]!r} has no known tool family"
            ) from exc
        profiles.append(profile)
    return profiles


def validate_tool_grants(roster: list[AgentProfile], registry: dict) -> None:
    """Every granted tool identifier must resolve at roster-load time."""
    for profile in roster:
        missing = [t for t in profile.tools if t not in registry]
        if missing:
            raise ConfigError(f"agent {profile.agent_id} grants unknown tools: {missing}")


def bind_models(roster: list[AgentProfile], scenario: Scenario) -> list[AgentProfile]:
    """Attach the scenario's per-agent model configs to the roster."""
    bound = []
    for profile in roster:
        model = scenario.agents.get(profile.agent_id)
        if model is None:
            raise ConfigError(
                f"scenario {scenario.scenario_id} has no model for agent {profile.agent_id}"
            )
        bound.append(replace(profile, model=model))
    return bound
