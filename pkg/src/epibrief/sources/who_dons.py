"""WHO Disease Outbreak News client.

The public news surface is an OData endpoint returning a JSON envelope
``{"value": [...]}``. Queries are serialized deterministically with the
parameters in fixed order: ``$filter`` (only when predicates exist),
``$orderby=<date field> desc``, ``$top=N``. Predicates are joined with
`` and ``; keyword matching uses the OData v4 ``contains(field,'kw')``
form against both the title and summary fields; all values are
percent-encoded. Endpoint path and field names are configuration, not
constants, because the public surface has churned before.

Individual records that lack a parseable date, an absolute URL, or a
title are skipped with a warning; only a missing ``value`` array fails
the whole batch.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date, datetime
from html.parser import HTMLParser
from urllib.parse import quote, urlsplit

import httpx

from epibrief.errors import (
    InvalidQueryError,
    MalformedEnvelopeError,
    TransportError,
)

logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://www.who.int/api/news/diseaseoutbreaknews"


@dataclass(frozen=True)
class DonsFields:
    """Response/field names on the OData surface; overridable in config."""

    title: str = "Title"
    date: str = "PublicationDate"
    summary: str = "Summary"
    url: str = "ItemDefaultUrl"


@dataclass(frozen=True)
class DonsQuery:
    keyword: str | None = None
    date_from: date | None = None
    date_to: date | None = None
    top: int = 20

    def __post_init__(self):
        if self.top < 1 or self.top > 100:
            raise InvalidQueryError(f"top must be in 1..100, got {self.top}")
        if self.keyword is not None and not self.keyword.strip():
            raise InvalidQueryError("keyword must be non-empty when given")
        if self.date_from and self.date_to and self.date_from > self.date_to:
            raise InvalidQueryError(
                f"date_from {self.date_from} is after date_to {self.date_to}"
            )


@dataclass(frozen=True)
class DonsItem:
    title: str
    publication_date: date
    url: str
    summary_html: str
    summary_plain: str

    def as_dict(self) -> dict:
        return {
            "title": self.title,
            "publication_date": self.publication_date.isoformat(),
            "url": self.url,
            "summary_html": self.summary_html,
            "summary_plain": self.summary_plain,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DonsItem":
        return cls(
            title=raw["title"],
            publication_date=date.fromisoformat(raw["publication_date"]),
            url=raw["url"],
            summary_html=raw["summary_html"],
            summary_plain=raw["summary_plain"],
        )


def build_odata_query(q: DonsQuery, fields: DonsFields = DonsFields()) -> str:
    """Serialize a query to its canonical URL query string."""
    predicates = []
    if q.keyword is not None:
        kw = q.keyword.replace("'", "''")
        predicates.append(
            f"(contains({fields.title},'{kw}') or contains({fields.summary},'{kw}'))"
        )
    if q.date_from is not None:
        predicates.append(f"{fields.date} ge {q.date_from.isoformat()}T00:00:00Z")
    if q.date_to is not None:
        predicates.append(f"{fields.date} le {q.date_to.isoformat()}T23:59:59Z")

    parts = []
    if predicates:
        parts.append("$filter=" + quote(" and ".join(predicates), safe=""))
    parts.append("$orderby=" + quote(f"{fields.date} desc", safe=""))
    parts.append(f"$top={q.top}")
    return "&".join(parts)


class _TagStripper(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []

    def handle_data(self, data: str):
        self.chunks.append(data)


def strip_html(text: str) -> str:
    """Drop tags, resolve entities, collapse whitespace runs."""
    parser = _TagStripper()
    parser.feed(text)
    parser.close()
    return " ".join("".join(parser.chunks).split())


def _parse_record(raw: dict, fields: DonsFields) -> DonsItem:
    title = raw.get(fields.title)
    if not isinstance(title, str) or not title.strip():
        raise ValueError("missing title")
    raw_date = raw.get(fields.date)
    if not isinstance(raw_date, str):
        raise ValueError("missing publication date")
    # Accept plain dates and full ISO timestamps (trailing Z included).
    pub = datetime.fromisoformat(raw_date.replace("Z", "+00:00")).date()
    url = raw.get(fields.url)
    if not isinstance(url, str):
        raise ValueError("missing url")
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"url not absolute: {url!r}")
    summary_html = raw.get(fields.summary) or ""
    return DonsItem(
        title=title.strip(),
        publication_date=pub,
        url=url,
        summary_html=summary_html,
        summary_plain=strip_html(summary_html),
    )


def parse_dons_payload(body: str, fields: DonsFields = DonsFields()) -> list[DonsItem]:
    """Parse the endpoint's JSON envelope into items, newest first."""
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedEnvelopeError(f"body is not JSON: {exc}") from exc
    value = data.get("value") if isinstance(data, dict) else None
    if not isinstance(value, list):
        raise MalformedEnvelopeError('response lacks a "value" array')
    items: list[DonsItem] = []
    for i, raw in enumerate(value):
        try:
            items.append(_parse_record(raw, fields))
        except (ValueError, TypeError) as exc:
            logger.warning("skipping outbreak-news record %d: %s", i, exc)
    items.sort(key=lambda it: it.publication_date, reverse=True)
    return items


async def fetch_dons(
    client: httpx.AsyncClient,
    q: DonsQuery,
    endpoint: str = DEFAULT_ENDPOINT,
    fields: DonsFields = DonsFields(),
) -> list[DonsItem]:
    """GET the endpoint with the canonical query string and parse items.

    Retries once on transport errors; any non-2xx status raises
    TransportError.
    """
    url = f"{endpoint}?{build_odata_query(q, fields)}"
    for attempt in (0, 1):
        try:
            resp = await client.get(url)
            break
        except httpx.TransportError as exc:
            if attempt:
                raise TransportError(f"outbreak-news fetch failed: {exc}") from exc
    if resp.status_code >= 400:
        raise TransportError(f"outbreak-news endpoint returned {resp.status_code}")
    return parse_dons_payload(resp.text, fields)
