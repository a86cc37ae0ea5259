"""Tool registry: named capabilities the sub-agents may invoke.

Each tool is an async callable taking the delegated instruction and
returning evidence text (markdown for the model context) plus the
source citations backing it. Sub-agents invoke every tool they are
granted, once, in grant order; failures raise SourceError subclasses
and are handled by the agent runner, never here.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Awaitable, Callable

import httpx

from epibrief.config import AppConfig
from epibrief.errors import NotFoundError
from epibrief.report import ORIGIN_CDC, ORIGIN_PUBMED, ORIGIN_WHO, SourceCitation
from epibrief.sources import cdc_wonder, pubmed_bioc, who_dons

logger = logging.getLogger(__name__)

ToolFn = Callable[[str], Awaitable["ToolResult"]]

TOOL_WHO_DONS = "who.dons"
TOOL_CDC_WONDER = "cdc.wonder"
TOOL_PUBMED_LITERATURE = "pubmed.literature"


@dataclass(frozen=True)
class ToolResult:
    tool: str
    text: str
    citations: tuple[SourceCitation, ...]


def _shorten(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    cut = text[:limit]
    if " " in cut:
        cut = cut[: cut.rfind(" ")]
    return cut.rstrip() + "..."


def build_tools(
    config: AppConfig,
    client: httpx.AsyncClient,
    limiter: pubmed_bioc.TokenBucket | None = None,
) -> dict[str, ToolFn]:
    """Wire the three source clients into the tool registry."""

    async def who_dons_tool(instruction: str) -> ToolResult:
        query = who_dons.DonsQuery(top=config.who.top)
        items = await who_dons.fetch_dons(
            client, query, endpoint=config.who.endpoint, fields=config.who.fields
        )
        if not items:
            return ToolResult(TOOL_WHO_DONS, "No recent outbreak notices returned.", ())
        lines = [
            f"- **{it.title}** ({it.publication_date.isoformat()}): "
            f"{_shorten(it.summary_plain, config.who.summary_chars)}"
            for it in items
        ]
        citations = tuple(
            SourceCitation(url=it.url, title=it.title, origin=ORIGIN_WHO) for it in items
        )
        return ToolResult(TOOL_WHO_DONS, "\n".join(lines), citations)

    async def cdc_wonder_tool(instruction: str) -> ToolResult:
        request = cdc_wonder.WonderRequest(
            dataset_id=config.wonder.default_dataset,
            parameters=dict(config.wonder.default_parameters),
        )
        body = await cdc_wonder.post_request(client, request, config.wonder.endpoints)
        table = cdc_wonder.parse_response_xml(body, columns=list(config.wonder.columns))
        text = cdc_wonder.summarize_table(table, max_rows=config.wonder.max_rows)
        if table.footnotes:
            text += "\n\nFootnotes:\n" + "\n".join(f"- {f}" for f in table.footnotes)
        citation = SourceCitation(
            url=config.wonder.dataset_page,
            title=f"CDC WONDER dataset {config.wonder.default_dataset}",
            origin=ORIGIN_CDC,
        )
        return ToolResult(TOOL_CDC_WONDER, text, (citation,))

    async def pubmed_tool(instruction: str) -> ToolResult:
        api_key = os.environ.get(config.pubmed.api_key_env) or None
        ids = await pubmed_bioc.search(
            client,
            instruction,
            config.pubmed.max_search_results,
            esearch_url=config.pubmed.esearch_url,
            api_key=api_key,
            limiter=limiter,
        )
        docs = []
        for doc_id in ids[: config.pubmed.fetch_documents]:
            try:
                docs.append(
                    await pubmed_bioc.fetch_bioc(
                        client,
                        doc_id,
                        url_template=config.pubmed.bioc_url_template,
                        limiter=limiter,
                    )
                )
            except NotFoundError:
                logger.warning("article %s has no full record; skipping", doc_id)
        if not docs:
            return ToolResult(TOOL_PUBMED_LITERATURE, "No retrievable literature found.", ())
        text = pubmed_bioc.summarize_hits(docs, max_chars=config.pubmed.snippet_chars)
        citations = tuple(
            SourceCitation(url=h.url, title=h.title, origin=ORIGIN_PUBMED)
            for h in (pubmed_bioc.hit_from_document(d, config.pubmed.snippet_chars) for d in docs)
        )
        return ToolResult(TOOL_PUBMED_LITERATURE, text, citations)

    return {
        TOOL_WHO_DONS: who_dons_tool,
        TOOL_CDC_WONDER: cdc_wonder_tool,
        TOOL_PUBMED_LITERATURE: pubmed_tool,
    }
