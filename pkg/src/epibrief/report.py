"""Final briefing assembly: markdown sections, source dedup, metrics.

Rendering is a pure function of its inputs; the same findings always
produce the same bytes. Word counting strips the URL half of markdown
links and heading markers before splitting on whitespace, so link
targets never inflate the count. Source URLs are deduplicated on a
normalized form (lowercase scheme and host, trailing slash stripped,
fragment dropped) with the first occurrence winning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence
from urllib.parse import urlsplit, urlunsplit

ORIGIN_WHO = "WHO"
ORIGIN_CDC = "CDC"
ORIGIN_PUBMED = "PubMed"
ORIGINS = (ORIGIN_WHO, ORIGIN_CDC, ORIGIN_PUBMED)

NO_CONTRADICTIONS = "No contradictions detected."
NO_SOURCES = "_No sources collected._"
DEGRADED_SYNTHESIS_MARKER = (
    "_degraded synthesis: assembled mechanically from sub-agent findings._"
)


@dataclass(frozen=True)
class SourceCitation:
    url: str
    title: str
    origin: str

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown citation origin {self.origin!r}")
        parts = urlsplit(self.url)
        if not parts.scheme or not parts.netloc:
            raise ValueError(f"citation url must be absolute: {self.url!r}")

    def as_dict(self) -> dict:
        return {"url": self.url, "title": self.title, "origin": self.origin}


@dataclass(frozen=True)
class ReportMetrics:
    words: int
    source_count: int


@dataclass(frozen=True)
class Briefing:
    query: str
    sections: tuple[tuple[str, str], ...]
    sources: tuple[SourceCitation, ...]
    metrics: ReportMetrics
    degraded: bool


_LINK_RE = re.compile(r"\[([^\]]*)\]\(([^)]*)\)")
_HEADING_RE = re.compile(r"^#{1,6}\s+", re.MULTILINE)


def word_count(markdown: str) -> int:
    """Count maximal non-whitespace runs after stripping link URLs and
    heading markers."""
    text = _LINK_RE.sub(lambda m: m.group(1), markdown)
    text = _HEADING_RE.sub("", text)
    return len(text.split())


def normalize_url(url: str) -> str:
    """Comparison key: lowercase scheme+host, strip trailing '/', drop
    fragment. Query string and path case are preserved."""
    parts = urlsplit(url)
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


def dedupe_sources(citations: Iterable[SourceCitation]) -> list[SourceCitation]:
    """Drop later citations whose normalized URL was already seen."""
    seen: set[str] = set()
    kept: list[SourceCitation] = []
    for c in citations:
        key = normalize_url(c.url)
        if key in seen:
            continue
        seen.add(key)
        kept.append(c)
    return kept


def briefing_markdown(briefing: Briefing) -> str:
    """Assemble the full markdown document from a briefing's sections."""
    parts = [f"# Investigation Briefing\n\n**Query:** {briefing.query}\n"]
    for heading, body in briefing.sections:
        parts.append(f"\n## {heading}\n\n{body}\n")
    return "".join(parts)


def briefing_sidecar(briefing: Briefing) -> dict:
    """JSON sidecar written next to the markdown file."""
    return {
        "query": briefing.query,
        "degraded": briefing.degraded,
        "metrics": {
            "words": briefing.metrics.words,
            "source_count": briefing.metrics.source_count,
        },
        "sources": [c.as_dict() for c in briefing.sources],
    }


def _mechanical_summary(findings: Sequence, degraded: bool) -> str:
    lines = []
    for f in findings:
        first = f.summary.strip().splitlines()[0] if f.summary.strip() else "(no summary)"
        lines.append(f"- **{f.role}**: {first}")
    body = "\n".join(lines) if lines else "No findings were returned."
    if degraded:
        body += "\n\n" + DEGRADED_SYNTHESIS_MARKER
    return body


def render_briefing(
    query: str,
    findings: Sequence,
    flags: Sequence,
    synthesis_text: str | None,
) -> Briefing:
    """Build the briefing with its fixed section order.

    ``findings`` are `orchestrator.AgentFinding` values in subtask order;
    ``flags`` are `orchestrator.ContradictionFlag` values. A ``None``
    synthesis text means the manager model was unavailable and the
    summary is assembled mechanically with a degraded marker.
    """
    degraded_synthesis = synthesis_text is None
    sections: list[tuple[str, str]] = []

    if degraded_synthesis:
        sections.append(("Summary", _mechanical_summary(findings, degraded=True)))
    else:
        sections.append(("Summary", synthesis_text.strip()))

    for f in findings:
        body = f.summary.strip()
        if f.failed:
            body = f"**Degraded finding.** {body}"
        level = f.risk_signal.level
        basis = f.risk_signal.basis
        risk_line = f"_Risk signal: {level}" + (f" ({basis})_" if basis else "_")
        sections.append((f"{f.role} Findings", f"{body}\n\n{risk_line}"))

    if flags:
        risk_body = "\n".join(f"- {flag.note}" for flag in flags)
    else:
        risk_body = NO_CONTRADICTIONS
    sections.append(("Risk Assessment", risk_body))

    all_citations: list[SourceCitation] = []
    for f in findings:
        all_citations.extend(f.citations)
    sources = dedupe_sources(all_citations)
    if sources:
        source_body = "\n".join(
            f"{i}. [{c.title}]({c.url}) ({c.origin})" for i, c in enumerate(sources, 1)
        )
    else:
        source_body = NO_SOURCES
    sections.append(("Sources", source_body))

    degraded = degraded_synthesis or any(f.failed for f in findings)
    draft = Briefing(
        query=query,
        sections=tuple(sections),
        sources=tuple(sources),
        metrics=ReportMetrics(words=0, source_count=len(sources)),
        degraded=degraded,
    )
    words = word_count(briefing_markdown(draft))
    return Briefing(
        query=query,
        sections=draft.sections,
        sources=draft.sources,
        metrics=ReportMetrics(words=words, source_count=len(sources)),
        degraded=degraded,
    )
