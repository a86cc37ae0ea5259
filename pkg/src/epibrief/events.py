"""Typed, ordered session event stream and its wire serialization.

Every investigation emits a single strictly-increasing sequence of
``StreamEvent`` records. The wire form is standard server-sent events
framing with a canonical single-line JSON envelope::

    event: <kind>
    id: <seq>
    data: {"session_id":...,"seq":...,"kind":...,"agent_id":...,"at":...,"payload":{...}}

Envelope keys are always emitted in that order and the JSON is compact
(no spaces), so identical events serialize to identical bytes. Newlines
never occur inside the ``data:`` line because JSON string escaping keeps
payload text on one line. Line separator is LF only.

``validate_sequence`` is the oracle for the orchestrator's event
contract: a session trace is accepted iff sequence numbers are gapless
from 0 and the kinds follow the investigation grammar (one Thought, one
IntentIdentified, per-delegation tool-call pairs closed by a finding,
verification notes, then exactly one FinalBriefing and one
SourcesListed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

KIND_THOUGHT = "Thought"
KIND_INTENT = "IntentIdentified"
KIND_DELEGATION = "DelegationIssued"
KIND_TOOL_INVOKED = "ToolInvoked"
KIND_TOOL_COMPLETED = "ToolCompleted"
KIND_FINDING = "FindingReceived"
KIND_VERIFICATION = "VerificationNote"
KIND_BRIEFING = "FinalBriefing"
KIND_SOURCES = "SourcesListed"
KIND_ERROR = "Error"

EVENT_KINDS = (
    KIND_THOUGHT,
    KIND_INTENT,
    KIND_DELEGATION,
    KIND_TOOL_INVOKED,
    KIND_TOOL_COMPLETED,
    KIND_FINDING,
    KIND_VERIFICATION,
    KIND_BRIEFING,
    KIND_SOURCES,
    KIND_ERROR,
)

# Required payload keys per kind, checked at construction.
_PAYLOAD_KEYS: dict[str, tuple[str, ...]] = {
    KIND_THOUGHT: ("text",),
    KIND_INTENT: ("intent", "categories"),
    KIND_DELEGATION: ("instruction", "category"),
    KIND_TOOL_INVOKED: ("tool", "input"),
    KIND_TOOL_COMPLETED: ("tool", "status", "summary"),
    KIND_FINDING: ("summary", "citations", "risk_level", "risk_basis", "tool_calls_made"),
    KIND_VERIFICATION: ("note",),
    KIND_BRIEFING: ("markdown", "metrics", "degraded"),
    KIND_SOURCES: ("sources",),
    KIND_ERROR: ("message",),
}

# Kinds that only make sense attached to a specific sub-agent.
_AGENT_SCOPED = frozenset(
    {KIND_DELEGATION, KIND_TOOL_INVOKED, KIND_TOOL_COMPLETED, KIND_FINDING}
)

# Timestamp substituted when transcripts are normalized for comparison.
NORMALIZED_AT = "1970-01-01T00:00:00+00:00"


def now_iso() -> str:
    """Current UTC time in ISO-8601 form, the `at` field format."""
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class StreamEvent:
    session_id: str
    seq: int
    kind: str
    agent_id: str | None
    payload: dict
    at: str

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError(f"seq must be non-negative, got {self.seq}")
        if self.kind not in _PAYLOAD_KEYS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        missing = [k for k in _PAYLOAD_KEYS[self.kind] if k not in self.payload]
        if missing:
            raise ValueError(f"{self.kind} payload missing keys: {missing}")
        if self.kind in _AGENT_SCOPED and not self.agent_id:
            raise ValueError(f"{self.kind} requires agent_id")
        if self.kind == KIND_SOURCES:
            for src in self.payload["sources"]:
                if not all(k in src for k in ("url", "title", "origin")):
                    raise ValueError("SourcesListed entries need url/title/origin")

    def envelope(self) -> dict:
        """Canonical envelope dict; key order is the wire order."""
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "kind": self.kind,
            "agent_id": self.agent_id,
            "at": self.at,
            "payload": self.payload,
        }


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def serialize_envelope(event: StreamEvent) -> str:
    """One canonical JSON line per event (the session-log record form)."""
    return _dumps(event.envelope())


def serialize_sse(event: StreamEvent) -> str:
    """SSE frame: event/id/data lines plus the blank-line terminator."""
    return (
        f"event: {event.kind}\n"
        f"id: {event.seq}\n"
        f"data: {serialize_envelope(event)}\n\n"
    )


def parse_envelope(line: str) -> StreamEvent:
    """Inverse of :func:`serialize_envelope`."""
    raw = json.loads(line)
    return StreamEvent(
        session_id=raw["session_id"],
        seq=raw["seq"],
        kind=raw["kind"],
        agent_id=raw.get("agent_id"),
        payload=raw["payload"],
        at=raw["at"],
    )


def normalize_timestamps(events: Iterable[StreamEvent]) -> list[StreamEvent]:
    """Replace every `at` with a fixed sentinel for byte comparisons."""
    return [
        StreamEvent(
            session_id=e.session_id,
            seq=e.seq,
            kind=e.kind,
            agent_id=e.agent_id,
            payload=e.payload,
            at=NORMALIZED_AT,
        )
        for e in events
    ]


def transcript(events: Iterable[StreamEvent], normalize: bool = False) -> str:
    """NDJSON transcript of a session, optionally timestamp-normalized."""
    items = normalize_timestamps(events) if normalize else list(events)
    return "".join(serialize_envelope(e) + "\n" for e in items)


def load_transcript(text: str) -> list[StreamEvent]:
    return [parse_envelope(line) for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class SequenceViolation:
    index: int
    message: str

    def __str__(self) -> str:
        return f"event {self.index}: {self.message}"


# Per-agent states while scanning the delegation phase.
_IDLE = "idle"
_DELEGATED = "delegated"
_DONE = "done"


@dataclass
class _Scan:
    agents: dict[str, str] = field(default_factory=dict)
    open_tool: dict[str, str] = field(default_factory=dict)
    verifying: bool = False

    def all_done(self) -> bool:
        return all(state == _DONE for state in self.agents.values())


def validate_sequence(events: list[StreamEvent]) -> SequenceViolation | None:
    """Accept a session trace iff it conforms to the investigation grammar.

    Returns ``None`` on acceptance, otherwise a violation naming the first
    offending index. Timestamps are ignored; only seq, session_id, kind,
    and agent pairing are checked.
    """
    if not events:
        return SequenceViolation(0, "missing Thought")
    session_id = events[0].session_id
    scan = _Scan()
    phase = "thought"
    for i, e in enumerate(events):
        if e.seq != i:
            return SequenceViolation(i, f"sequence gap: expected seq {i}, got {e.seq}")
        if e.session_id != session_id:
            return SequenceViolation(i, "mixed session ids in one trace")

        if phase == "thought":
            if e.kind != KIND_THOUGHT:
                return SequenceViolation(i, f"expected Thought, got {e.kind}")
            phase = "intent"
            continue
        if phase == "intent":
            if e.kind != KIND_INTENT:
                return SequenceViolation(i, f"expected IntentIdentified, got {e.kind}")
            phase = "body"
            continue
        if phase == "final":
            if e.kind != KIND_SOURCES:
                return SequenceViolation(i, f"expected SourcesListed, got {e.kind}")
            phase = "end"
            continue
        if phase == "end":
            return SequenceViolation(i, f"{e.kind} after SourcesListed")

        # phase == "body": delegation fan-out then verification notes.
        if e.kind == KIND_DELEGATION:
            if scan.verifying:
                return SequenceViolation(i, "DelegationIssued after verification began")
            if scan.agents.get(e.agent_id) is not None:
                return SequenceViolation(i, f"duplicate delegation to {e.agent_id}")
            scan.agents[e.agent_id] = _DELEGATED
        elif e.kind == KIND_TOOL_INVOKED:
            if scan.agents.get(e.agent_id) != _DELEGATED:
                return SequenceViolation(i, f"ToolInvoked for {e.agent_id} outside delegation")
            if e.agent_id in scan.open_tool:
                return SequenceViolation(i, f"nested ToolInvoked for {e.agent_id}")
            scan.open_tool[e.agent_id] = e.payload["tool"]
        elif e.kind == KIND_TOOL_COMPLETED:
            opened = scan.open_tool.pop(e.agent_id, None)
            if opened is None:
                return SequenceViolation(i, f"ToolCompleted without ToolInvoked for {e.agent_id}")
            if opened != e.payload["tool"]:
                return SequenceViolation(
                    i, f"ToolCompleted tool {e.payload['tool']!r} does not match open {opened!r}"
                )
        elif e.kind == KIND_FINDING:
            if e.agent_id in scan.open_tool:
                return SequenceViolation(i, f"FindingReceived with open tool call for {e.agent_id}")
            if scan.agents.get(e.agent_id) != _DELEGATED:
                return SequenceViolation(i, f"FindingReceived for undelegated agent {e.agent_id}")
            scan.agents[e.agent_id] = _DONE
        elif e.kind == KIND_VERIFICATION:
            if not scan.all_done():
                return SequenceViolation(i, "VerificationNote before all findings received")
            scan.verifying = True
        elif e.kind == KIND_BRIEFING:
            if not scan.all_done():
                return SequenceViolation(i, "FinalBriefing before all findings received")
            phase = "final"
        else:
            return SequenceViolation(i, f"{e.kind} not allowed here")

    if phase != "end":
        return SequenceViolation(len(events), f"truncated trace: ended in phase {phase!r}")
    return None
