"""NCBI literature client: E-utilities search plus BioC article text.

Search goes through the esearch endpoint with JSON output. Article text
is fetched from the BioC REST surface in BioC-JSON; when only BioC XML
is available, :func:`convert_bioc_xml_to_json` produces the canonical
JSON rendering. Canonical means: object keys in the fixed schema order
(collection: source, date, key, documents; document: id, infons,
passages; passage: offset, infons, text), arrays preserving XML order,
compact separators, UTF-8 kept unescaped. Converting the same XML twice
yields identical bytes, and parsing the conversion output equals
parsing the XML directly on the retained fields.

Passage annotations are not modeled; only infons ride along as opaque
metadata. Offsets must be non-negative and strictly increasing within a
document; a document violating that is rejected, never repaired.

All live calls go through a shared token bucket honoring the NCBI rate
guideline (3 requests/second without an API key; the key, when present
in the environment, raises the ceiling to 10/second).
"""

from __future__ import annotations

import asyncio
import json
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import httpx

from epibrief.errors import (
    InvalidQueryError,
    MalformedEnvelopeError,
    MalformedXmlError,
    NotBioCError,
    NotFoundError,
    SchemaViolationError,
    TransportError,
)

DEFAULT_ESEARCH_URL = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi"
DEFAULT_BIOC_URL_TEMPLATE = (
    "https://www.ncbi.nlm.nih.gov/research/bionlp/RESTful/pubmed.cgi/BioC_json/{doc_id}/unicode"
)
ARTICLE_URL_TEMPLATE = "https://pubmed.ncbi.nlm.nih.gov/{doc_id}/"

KEYLESS_RATE_PER_SEC = 3.0
KEYED_RATE_PER_SEC = 10.0


class TokenBucket:
    """Shared rate limiter, safe under concurrent async callers."""

    def __init__(self, rate_per_sec: float, capacity: float | None = None):
        self.rate = rate_per_sec
        self.capacity = capacity if capacity is not None else rate_per_sec
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = asyncio.Lock()

    async def acquire(self):
        async with self._lock:
            while True:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                await asyncio.sleep((1.0 - self._tokens) / self.rate)


@dataclass(frozen=True)
class BioCPassage:
    offset: int
    text: str
    infons: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class BioCDocument:
    doc_id: str
    passages: tuple[BioCPassage, ...]
    infons: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.doc_id:
            raise SchemaViolationError("document id must be non-empty")
        last = -1
        for p in self.passages:
            if p.offset < 0:
                raise SchemaViolationError(f"negative passage offset {p.offset}")
            if p.offset <= last:
                raise SchemaViolationError(
                    f"passage offsets not strictly increasing at {p.offset}"
                )
            last = p.offset


@dataclass(frozen=True)
class LiteratureHit:
    doc_id: str
    title: str
    snippet: str
    url: str


async def search(
    client: httpx.AsyncClient,
    term: str,
    max_results: int,
    esearch_url: str = DEFAULT_ESEARCH_URL,
    api_key: str | None = None,
    limiter: TokenBucket | None = None,
) -> list[str]:
    """Return article ids in the service's relevance order."""
    if not term.strip():
        raise InvalidQueryError("search term must be non-empty")
    if not 1 <= max_results <= 50:
        raise ValueError(f"max_results must be in 1..50, got {max_results}")
    params = {
        "db": "pubmed",
        "term": term,
        "retmax": str(max_results),
        "retmode": "json",
    }
    if api_key:
        params["api_key"] = api_key
    if limiter:
        await limiter.acquire()
    for attempt in (0, 1):
        try:
            resp = await client.get(esearch_url, params=params)
            break
        except httpx.TransportError as exc:
            if attempt:
                raise TransportError(f"literature search failed: {exc}") from exc
    if resp.status_code >= 400:
        raise TransportError(f"search endpoint returned {resp.status_code}")
    try:
        ids = resp.json()["esearchresult"]["idlist"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MalformedEnvelopeError(f"unexpected search envelope: {exc}") from exc
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
        raise MalformedEnvelopeError("idlist is not a list of strings")
    return ids[:max_results]


def _parse_passage_json(raw: dict) -> BioCPassage:
    return BioCPassage(
        offset=int(raw["offset"]),
        text=raw.get("text") or "",
        infons={str(k): str(v) for k, v in (raw.get("infons") or {}).items()},
    )


def _parse_document_json(raw: dict) -> BioCDocument:
    return BioCDocument(
        doc_id=str(raw.get("id") or ""),
        passages=tuple(_parse_passage_json(p) for p in raw.get("passages") or []),
        infons={str(k): str(v) for k, v in (raw.get("infons") or {}).items()},
    )


def parse_bioc_json(text: str) -> list[BioCDocument]:
    """Parse a BioC-JSON collection (or a singleton list of collections)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedEnvelopeError(f"body is not JSON: {exc}") from exc
    if isinstance(data, list):
        if not data:
            return []
        data = data[0]
    if not isinstance(data, dict) or "documents" not in data:
        raise MalformedEnvelopeError("not a BioC collection: no documents key")
    try:
        return [_parse_document_json(d) for d in data["documents"]]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaViolationError):
            raise
        raise MalformedEnvelopeError(f"malformed BioC document: {exc}") from exc


def _infons_from_xml(el: ET.Element) -> dict[str, str]:
    infons: dict[str, str] = {}
    for infon in el.findall("infon"):
        infons[infon.attrib.get("key", "")] = infon.text or ""
    return infons


def _require_collection(xml: str) -> ET.Element:
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise MalformedXmlError(f"unparseable XML: {exc}") from exc
    if root.tag != "collection":
        raise NotBioCError(f"root element is {root.tag!r}, expected collection")
    return root


def parse_bioc_xml(xml: str) -> list[BioCDocument]:
    root = _require_collection(xml)
    docs = []
    for doc_el in root.findall("document"):
        passages = []
        for p_el in doc_el.findall("passage"):
            offset_text = p_el.findtext("offset")
            if offset_text is None:
                raise MalformedXmlError("passage lacks an offset element")
            passages.append(
                BioCPassage(
                    offset=int(offset_text),
                    text=p_el.findtext("text") or "",
                    infons=_infons_from_xml(p_el),
                )
            )
        docs.append(
            BioCDocument(
                doc_id=doc_el.findtext("id") or "",
                passages=tuple(passages),
                infons=_infons_from_xml(doc_el),
            )
        )
    return docs


def convert_bioc_xml_to_json(xml: str) -> str:
    """Convert BioC XML to the canonical BioC-JSON text."""
    root = _require_collection(xml)
    documents = []
    for doc_el in root.findall("document"):
        passages = []
        for p_el in doc_el.findall("passage"):
            offset_text = p_el.findtext("offset")
            if offset_text is None:
                raise MalformedXmlError("passage lacks an offset element")
            passages.append(
                {
                    "offset": int(offset_text),
                    "infons": _infons_from_xml(p_el),
                    "text": p_el.findtext("text") or "",
                }
            )
        documents.append(
            {
                "id": doc_el.findtext("id") or "",
                "infons": _infons_from_xml(doc_el),
                "passages": passages,
            }
        )
    collection = {
        "source": root.findtext("source") or "",
        "date": root.findtext("date") or "",
        "key": root.findtext("key") or "",
        "documents": documents,
    }
    return json.dumps(collection, ensure_ascii=False, separators=(",", ":"))


async def fetch_bioc(
    client: httpx.AsyncClient,
    doc_id: str,
    url_template: str = DEFAULT_BIOC_URL_TEMPLATE,
    limiter: TokenBucket | None = None,
) -> BioCDocument:
    """Fetch one article's BioC-JSON document."""
    if not doc_id:
        raise ValueError("doc_id must be non-empty")
    url = url_template.format(doc_id=doc_id)
    if limiter:
        await limiter.acquire()
    for attempt in (0, 1):
        try:
            resp = await client.get(url)
            break
        except httpx.TransportError as exc:
            if attempt:
                raise TransportError(f"article fetch failed: {exc}") from exc
    if resp.status_code == 404:
        raise NotFoundError(f"article {doc_id} not found")
    if resp.status_code >= 400:
        raise TransportError(f"article endpoint returned {resp.status_code}")
    docs = parse_bioc_json(resp.text)
    if not docs:
        raise NotFoundError(f"article {doc_id} not in response collection")
    for doc in docs:
        if doc.doc_id == doc_id:
            return doc
    return docs[0]


def _truncate_words(text: str, max_chars: int) -> str:
    if len(text) <= max_chars:
        return text
    cut = text[:max_chars]
    if " " in cut:
        cut = cut[: cut.rfind(" ")]
    return cut.rstrip() + "..."


def _passage_kind(p: BioCPassage) -> str:
    for key in ("type", "section", "section_type"):
        value = p.infons.get(key, "")
        if value:
            return value.lower()
    return ""


def hit_from_document(doc: BioCDocument, max_chars: int) -> LiteratureHit:
    title = ""
    body = ""
    for p in doc.passages:
        kind = _passage_kind(p)
        if not title and kind == "title":
            title = p.text.strip()
        elif not body and kind in ("abstract", "paragraph"):
            body = p.text.strip()
    if not title:
        title = doc.passages[0].text.strip() if doc.passages else doc.doc_id
    if not body:
        remaining = [p.text.strip() for p in doc.passages if p.text.strip() != title]
        body = remaining[0] if remaining else title
    return LiteratureHit(
        doc_id=doc.doc_id,
        title=title,
        snippet=_truncate_words(body, max_chars),
        url=ARTICLE_URL_TEMPLATE.format(doc_id=doc.doc_id),
    )


def summarize_hits(docs: list[BioCDocument], max_chars: int = 240) -> str:
    """Markdown bullet list, one ``title — snippet (url)`` line per doc."""
    hits = [hit_from_document(d, max_chars) for d in docs]
    return "\n".join(f"- {h.title} — {h.snippet} ({h.url})" for h in hits)
