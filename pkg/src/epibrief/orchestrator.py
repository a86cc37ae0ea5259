"""The four-stage investigative loop.

Ingestion validates the analyst's query. Decomposition asks the manager
model to split it into per-agent instructions (falling back to one
subtask per agent, instruction verbatim, when the reply cannot be
parsed). Delegation fans the subtasks out concurrently; every subtask
yields exactly one finding, in subtask order, no matter how its agent
fared — a timeout or tool failure produces a degraded finding, never an
aborted run. Reasoning extracts a coarse risk signal from each finding
and scans all pairs for contradictions (for example one source calling
the situation low risk while another reports a mortality spike). The
final stage synthesizes the briefing and emits it with the deduplicated
source list.

Every step is visible: the loop emits a strictly-increasing stream of
typed events (see `epibrief.events`) so the analyst can watch the
reasoning live. With the scripted gateway and fixture-backed tools the
whole run is a pure function of (query, scenario) up to timestamps.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from epibrief.agents import AgentProfile, bind_models, category_for
from epibrief.config import PromptLibrary
from epibrief.errors import (
    ConfigError,
    EmptyQueryError,
    GatewayError,
    SourceError,
    UnknownScenarioError,
)
from epibrief.events import (
    KIND_BRIEFING,
    KIND_DELEGATION,
    KIND_ERROR,
    KIND_FINDING,
    KIND_INTENT,
    KIND_SOURCES,
    KIND_THOUGHT,
    KIND_TOOL_COMPLETED,
    KIND_TOOL_INVOKED,
    KIND_VERIFICATION,
    StreamEvent,
    now_iso,
)
from epibrief.gateway import Gateway, Scenario
from epibrief.report import Briefing, SourceCitation, briefing_markdown, render_briefing
from epibrief.tools import ToolFn

logger = logging.getLogger(__name__)

RISK_UNKNOWN = "Unknown"
RISK_LOW = "Low"
RISK_MODERATE = "Moderate"
RISK_HIGH = "High"
RISK_SPIKE = "Spike"
RISK_LEVELS = (RISK_UNKNOWN, RISK_LOW, RISK_MODERATE, RISK_HIGH, RISK_SPIKE)

# Earliest occurrence in the text wins; ties resolve in this order.
_RISK_PHRASES = (
    ("low risk", RISK_LOW),
    ("moderate", RISK_MODERATE),
    ("high risk", RISK_HIGH),
    ("spike", RISK_SPIKE),
    ("surge in mortality", RISK_SPIKE),
)

# Symmetric conflict relation over risk levels; kept small and explicit
# so it can be tuned.
CONFLICT_PAIRS = frozenset(
    {
        (RISK_LOW, RISK_HIGH),
        (RISK_HIGH, RISK_LOW),
        (RISK_LOW, RISK_SPIKE),
        (RISK_SPIKE, RISK_LOW),
        (RISK_UNKNOWN, RISK_SPIKE),
        (RISK_SPIKE, RISK_UNKNOWN),
    }
)

_SENTENCE_SPLIT = re.compile(r"[.!?\n]")


@dataclass(frozen=True)
class RiskSignal:
    level: str = RISK_UNKNOWN
    basis: str = ""

    def __post_init__(self):
        if self.level not in RISK_LEVELS:
            raise ValueError(f"unknown risk level {self.level!r}")


def extract_risk_signal(text: str) -> RiskSignal:
    """Keyword scan over a finding summary; Unknown when nothing matches."""
    lowered = text.lower()
    best: tuple[int, int] | None = None
    best_level = RISK_UNKNOWN
    for rank, (phrase, level) in enumerate(_RISK_PHRASES):
        pos = lowered.find(phrase)
        if pos < 0:
            continue
        key = (pos, rank)
        if best is None or key < best:
            best = key
            best_level = level
    if best is None:
        return RiskSignal()
    pos = best[0]
    start = 0
    for m in _SENTENCE_SPLIT.finditer(text, 0, pos):
        start = m.end()
    end_match = _SENTENCE_SPLIT.search(text, pos)
    end = end_match.start() if end_match else len(text)
    return RiskSignal(level=best_level, basis=text[start:end].strip())


@dataclass(frozen=True)
class SubTask:
    agent_id: str
    instruction: str
    category: str
    timeout: float

    def __post_init__(self):
        if not self.instruction.strip():
            raise ValueError("subtask instruction must be non-empty")
        if self.timeout <= 0:
            raise ValueError("subtask timeout must be positive")


@dataclass(frozen=True)
class InvestigationPlan:
    query_id: str
    original_query: str
    subtasks: tuple[SubTask, ...]
    created_at: str
    fallback: bool = False
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.subtasks:
            raise ValueError("a plan needs at least one subtask")
        ids = [st.agent_id for st in self.subtasks]
        if len(set(ids)) != len(ids):
            raise ValueError("at most one subtask per agent")


@dataclass(frozen=True)
class AgentFinding:
    agent_id: str
    role: str
    summary: str
    citations: tuple[SourceCitation, ...]
    risk_signal: RiskSignal
    tool_calls_made: int
    elapsed: float
    failed: bool = False

    def as_dict(self) -> dict:
        """Stable serialization used for byte comparisons in tests."""
        return {
            "agent_id": self.agent_id,
            "role": self.role,
            "summary": self.summary,
            "citations": [c.as_dict() for c in self.citations],
            "risk_level": self.risk_signal.level,
            "risk_basis": self.risk_signal.basis,
            "tool_calls_made": self.tool_calls_made,
            "failed": self.failed,
        }


@dataclass(frozen=True)
class ContradictionFlag:
    agent_a: str
    agent_b: str
    level_a: str
    level_b: str
    note: str

    def __post_init__(self):
        if self.agent_a == self.agent_b:
            raise ValueError("a contradiction needs two distinct agents")
        if (self.level_a, self.level_b) not in CONFLICT_PAIRS:
            raise ValueError(f"({self.level_a}, {self.level_b}) is not a declared conflict")


def verify(findings: Sequence[AgentFinding]) -> list[ContradictionFlag]:
    """Flag every unordered pair whose levels are in the conflict relation."""
    flags: list[ContradictionFlag] = []
    for i in range(len(findings)):
        for j in range(i + 1, len(findings)):
            a, b = findings[i], findings[j]
            if (a.risk_signal.level, b.risk_signal.level) in CONFLICT_PAIRS:
                flags.append(
                    ContradictionFlag(
                        agent_a=a.agent_id,
                        agent_b=b.agent_id,
                        level_a=a.risk_signal.level,
                        level_b=b.risk_signal.level,
                        note=(
                            f'{a.agent_id} reported "{a.risk_signal.level}" while '
                            f'{b.agent_id} reported "{b.risk_signal.level}"'
                        ),
                    )
                )
    return flags


class EventEmitter:
    """Assigns the session's sequence numbers and fans events out to sinks."""

    def __init__(self, session_id: str, sinks: Sequence[Callable[[StreamEvent], None]]):
        self.session_id = session_id
        self._sinks = list(sinks)
        self._seq = 0
        self._lock = threading.Lock()

    def emit(self, kind: str, payload: dict, agent_id: str | None = None) -> StreamEvent:
        with self._lock:
            event = StreamEvent(
                session_id=self.session_id,
                seq=self._seq,
                kind=kind,
                agent_id=agent_id,
                payload=payload,
                at=now_iso(),
            )
            self._seq += 1
            for sink in self._sinks:
                sink(event)
            return event


def _describe_agents(roster: Sequence[AgentProfile]) -> str:
    return "\n".join(
        f"- {p.agent_id}: {p.role} ({category_for(p)}) — {p.goal}" for p in roster
    )


def _parse_plan_reply(reply: str, roster: Sequence[AgentProfile]) -> dict[str, str] | None:
    """Extract per-agent instructions from a manager reply; None when the
    reply is unusable."""
    start = reply.find("{")
    end = reply.rfind("}")
    if start < 0 or end <= start:
        return None
    try:
        data = json.loads(reply[start : end + 1])
    except json.JSONDecodeError:
        return None
    subtasks = data.get("subtasks") if isinstance(data, dict) else None
    if not isinstance(subtasks, list) or not subtasks:
        return None
    known = {p.agent_id for p in roster}
    instructions: dict[str, str] = {}
    for entry in subtasks:
        if not isinstance(entry, dict):
            return None
        agent_id = entry.get("agent_id")
        instruction = entry.get("instruction")
        if agent_id not in known or agent_id in instructions:
            return None
        if not isinstance(instruction, str) or not instruction.strip():
            return None
        instructions[agent_id] = instruction.strip()
    return instructions


def _query_hash(scenario_id: str, query: str) -> str:
    return hashlib.sha256(f"{scenario_id}\n{query}".encode("utf-8")).hexdigest()[:12]


async def decompose(
    query: str,
    roster: Sequence[AgentProfile],
    gateway: Gateway,
    prompts: PromptLibrary,
    scenario: Scenario,
    subtask_timeout: float,
) -> InvestigationPlan:
    """Split the query into per-agent subtasks via the manager model.

    An unparseable reply or a gateway failure yields the fallback plan:
    one subtask per roster agent carrying the original query verbatim.
    """
    trimmed = query.strip()
    if not trimmed:
        raise EmptyQueryError("query is blank")
    if not roster:
        raise ValueError("roster must be non-empty")

    notes: list[str] = []
    instructions: dict[str, str] | None = None
    user = prompts.decompose_user.format(query=trimmed, agents=_describe_agents(roster))
    try:
        exchange = await gateway.complete(
            scenario.manager, prompts.decompose_system, [("user", user)], role_tag="manager"
        )
        instructions = _parse_plan_reply(exchange.response, roster)
    except GatewayError as exc:
        notes.append(f"manager model unavailable during decomposition: {exc}")

    fallback = instructions is None
    if fallback:
        instructions = {p.agent_id: trimmed for p in roster}

    subtasks = tuple(
        SubTask(
            agent_id=p.agent_id,
            instruction=instructions[p.agent_id],
            category=category_for(p),
            timeout=subtask_timeout,
        )
        for p in roster
        if p.agent_id in instructions
    )
    return InvestigationPlan(
        query_id=_query_hash(scenario.scenario_id, trimmed),
        original_query=trimmed,
        subtasks=subtasks,
        created_at=now_iso(),
        fallback=fallback,
        notes=tuple(notes),
    )


@dataclass
class _SubtaskContext:
    open_tool: str | None = None
    finding: AgentFinding | None = None
    finding_emitted: bool = False


def _degraded_finding(profile: AgentProfile, reason: str, calls: int, elapsed: float) -> AgentFinding:
    summary = f"{profile.role} did not return usable findings: {reason}"
    return AgentFinding(
        agent_id=profile.agent_id,
        role=profile.role,
        summary=summary,
        citations=(),
        risk_signal=RiskSignal(),
        tool_calls_made=calls,
        elapsed=elapsed,
        failed=True,
    )


def _finding_payload(finding: AgentFinding) -> dict:
    # elapsed stays out of the wire payload so transcripts are byte-stable.
    return {
        "summary": finding.summary,
        "citations": [c.as_dict() for c in finding.citations],
        "risk_level": finding.risk_signal.level,
        "risk_basis": finding.risk_signal.basis,
        "tool_calls_made": finding.tool_calls_made,
    }


async def _run_subtask(
    subtask: SubTask,
    profile: AgentProfile,
    tools: dict[str, ToolFn],
    gateway: Gateway,
    prompts: PromptLibrary,
    emitter: EventEmitter,
    ctx: _SubtaskContext,
) -> AgentFinding:
    started = time.monotonic()
    evidence: list[tuple[str, str]] = []
    citations: list[SourceCitation] = []
    calls = 0
    for tool_id in profile.tools:
        fn = tools[tool_id]
        ctx.open_tool = tool_id
        emitter.emit(
            KIND_TOOL_INVOKED,
            {"tool": tool_id, "input": subtask.instruction},
            agent_id=profile.agent_id,
        )
        calls += 1
        try:
            result = await fn(subtask.instruction)
        except SourceError as exc:
            emitter.emit(
                KIND_TOOL_COMPLETED,
                {"tool": tool_id, "status": "error", "summary": str(exc)},
                agent_id=profile.agent_id,
            )
            ctx.open_tool = None
            continue
        emitter.emit(
            KIND_TOOL_COMPLETED,
            {"tool": tool_id, "status": "ok", "summary": f"{len(result.citations)} citation(s)"},
            agent_id=profile.agent_id,
        )
        ctx.open_tool = None
        evidence.append((tool_id, result.text))
        citations.extend(result.citations)

    if evidence:
        system = prompts.agent_system.format(
            role=profile.role, goal=profile.goal, backstory=profile.backstory
        )
        evidence_text = "\n\n".join(f"### {tool}\n\n{text}" for tool, text in evidence)
        user = prompts.agent_user.format(instruction=subtask.instruction, evidence=evidence_text)
        try:
            exchange = await gateway.complete(
                profile.model, system, [("user", user)], role_tag=profile.agent_id
            )
            finding = AgentFinding(
                agent_id=profile.agent_id,
                role=profile.role,
                summary=exchange.response.strip(),
                citations=tuple(citations),
                risk_signal=extract_risk_signal(exchange.response),
                tool_calls_made=calls,
                elapsed=time.monotonic() - started,
            )
        except GatewayError as exc:
            finding = AgentFinding(
                agent_id=profile.agent_id,
                role=profile.role,
                summary=(
                    f"{profile.role} collected evidence from {len(evidence)} tool(s) but the "
                    f"model call failed: {exc}"
                ),
                citations=tuple(citations),
                risk_signal=RiskSignal(),
                tool_calls_made=calls,
                elapsed=time.monotonic() - started,
                failed=True,
            )
    else:
        finding = _degraded_finding(
            profile, "all tool calls failed", calls, time.monotonic() - started
        )

    ctx.finding = finding
    emitter.emit(KIND_FINDING, _finding_payload(finding), agent_id=profile.agent_id)
    ctx.finding_emitted = True
    return finding


async def delegate(
    plan: InvestigationPlan,
    roster: Sequence[AgentProfile],
    tools: dict[str, ToolFn],
    gateway: Gateway,
    prompts: PromptLibrary,
    emitter: EventEmitter,
) -> list[AgentFinding]:
    """Fan subtasks out concurrently; findings come back in subtask order.

    A sub-agent that times out, raises, or loses its tools still yields
    a finding (empty citations, Unknown risk) — one agent's failure
    never aborts the loop. When a timeout interrupts an open tool call
    the closing events are emitted here so the trace stays grammar
    valid.
    """
    by_id = {p.agent_id: p for p in roster}
    contexts: list[_SubtaskContext] = []
    tasks: list[asyncio.Task] = []
    for subtask in plan.subtasks:
        profile = by_id[subtask.agent_id]
        emitter.emit(
            KIND_DELEGATION,
            {"instruction": subtask.instruction, "category": subtask.category},
            agent_id=subtask.agent_id,
        )
        ctx = _SubtaskContext()
        contexts.append(ctx)
        # Timeout armed at dispatch, not at collection, so a slow agent
        # cannot stretch the others' deadlines.
        tasks.append(
            asyncio.ensure_future(
                asyncio.wait_for(
                    _run_subtask(subtask, profile, tools, gateway, prompts, emitter, ctx),
                    timeout=subtask.timeout,
                )
            )
        )

    findings: list[AgentFinding] = []
    for subtask, task, ctx in zip(plan.subtasks, tasks, contexts):
        profile = by_id[subtask.agent_id]
        try:
            finding = await task
        except asyncio.TimeoutError:
            finding = _repair(profile, ctx, emitter, "timed out")
        except Exception as exc:  # noqa: BLE001 - isolation contract
            logger.exception("sub-agent %s crashed", subtask.agent_id)
            finding = _repair(profile, ctx, emitter, f"internal error: {exc}")
        findings.append(finding)
    return findings


def _repair(
    profile: AgentProfile,
    ctx: _SubtaskContext,
    emitter: EventEmitter,
    reason: str,
) -> AgentFinding:
    """Close an interrupted sub-agent's trace and produce its finding."""
    if ctx.finding_emitted and ctx.finding is not None:
        return ctx.finding
    if ctx.open_tool is not None:
        emitter.emit(
            KIND_TOOL_COMPLETED,
            {"tool": ctx.open_tool, "status": "error", "summary": reason},
            agent_id=profile.agent_id,
        )
        ctx.open_tool = None
    finding = _degraded_finding(profile, reason, calls=0, elapsed=0.0)
    emitter.emit(KIND_FINDING, _finding_payload(finding), agent_id=profile.agent_id)
    ctx.finding = finding
    ctx.finding_emitted = True
    return finding


async def synthesize(
    query: str,
    plan: InvestigationPlan,
    findings: Sequence[AgentFinding],
    flags: Sequence[ContradictionFlag],
    gateway: Gateway,
    prompts: PromptLibrary,
    scenario: Scenario,
) -> Briefing:
    """Final briefing; on gateway failure the summary is assembled
    mechanically and the briefing is marked degraded."""
    findings_text = "\n\n".join(
        f"### {f.role} ({f.risk_signal.level})\n\n{f.summary}" for f in findings
    )
    flags_text = "\n".join(f"- {fl.note}" for fl in flags) or "none"
    user = prompts.synthesize_user.format(query=query, findings=findings_text, flags=flags_text)
    synthesis_text: str | None
    try:
        exchange = await gateway.complete(
            scenario.manager, prompts.synthesize_system, [("user", user)], role_tag="manager"
        )
        synthesis_text = exchange.response
    except GatewayError as exc:
        logger.warning("synthesis degraded: %s", exc)
        synthesis_text = None
    return render_briefing(query, findings, flags, synthesis_text)


class Orchestrator:
    """Binds a runtime (roster, scenarios, tools, gateway factory) to the
    investigative loop."""

    def __init__(
        self,
        roster: Sequence[AgentProfile],
        scenarios: dict[str, Scenario],
        tools: dict[str, ToolFn],
        gateway_factory: Callable[[], Gateway],
        prompts: PromptLibrary,
        subtask_timeout: float = 60.0,
    ):
        self.roster = list(roster)
        self.scenarios = dict(scenarios)
        self.tools = dict(tools)
        self.gateway_factory = gateway_factory
        self.prompts = prompts
        self.subtask_timeout = subtask_timeout

    async def run_investigation(
        self,
        query: str,
        scenario_id: str,
        sinks: Sequence[Callable[[StreamEvent], None]],
        session_id: str | None = None,
    ) -> Briefing:
        """Execute the full loop, emitting events to every sink."""
        trimmed = query.strip()
        if not trimmed:
            raise EmptyQueryError("query is blank")
        scenario = self.scenarios.get(scenario_id)
        if scenario is None:
            raise UnknownScenarioError(f"unknown scenario: {scenario_id}")
        if session_id is None:
            session_id = f"run-{_query_hash(scenario_id, trimmed)}"
        emitter = EventEmitter(session_id, sinks)
        try:
            roster = bind_models(self.roster, scenario)
            for profile in roster:
                missing = [t for t in profile.tools if t not in self.tools]
                if missing:
                    raise ConfigError(
                        f"agent {profile.agent_id} grants unknown tools: {missing}"
                    )
            gateway = self.gateway_factory()
            plan = await decompose(
                trimmed, roster, gateway, self.prompts, scenario, self.subtask_timeout
            )
            thought = f"Decomposing the query into {len(plan.subtasks)} specialist task(s)."
            if plan.fallback:
                thought += (
                    " The manager reply could not be parsed into per-agent instructions;"
                    " falling back to one subtask per agent with the original query."
                )
            emitter.emit(KIND_THOUGHT, {"text": thought, "fallback": plan.fallback})
            emitter.emit(
                KIND_INTENT,
                {
                    "intent": f"Multi-source epidemiological assessment: {trimmed}",
                    "categories": [st.category for st in plan.subtasks],
                },
            )

            findings = await delegate(plan, roster, self.tools, gateway, self.prompts, emitter)
            flags = verify(findings)

            for note in plan.notes:
                emitter.emit(KIND_VERIFICATION, {"note": note})
            for flag in flags:
                emitter.emit(
                    KIND_VERIFICATION,
                    {
                        "note": flag.note,
                        "agent_a": flag.agent_a,
                        "agent_b": flag.agent_b,
                        "level_a": flag.level_a,
                        "level_b": flag.level_b,
                    },
                )
            if not plan.notes and not flags:
                emitter.emit(
                    KIND_VERIFICATION, {"note": "Logic verification found no contradictions."}
                )

            briefing = await synthesize(
                trimmed, plan, findings, flags, gateway, self.prompts, scenario
            )
            emitter.emit(
                KIND_BRIEFING,
                {
                    "markdown": briefing_markdown(briefing),
                    "metrics": {
                        "words": briefing.metrics.words,
                        "source_count": briefing.metrics.source_count,
                    },
                    "degraded": briefing.degraded,
                },
            )
            emitter.emit(
                KIND_SOURCES, {"sources": [c.as_dict() for c in briefing.sources]}
            )
            return briefing
        except EmptyQueryError:
            raise
        except Exception as exc:
            emitter.emit(KIND_ERROR, {"message": f"investigation failed: {exc}"})
            raise
