"""CDC WONDER client: XML request-parameter documents in, XML tables out.

Requests are POSTed to a per-dataset endpoint as a form field
``request_xml`` carrying a ``request-parameters`` document with one
``<parameter><name>N</name><value>V</value></parameter>`` line per
(name, value) pair. Parameters are sorted lexicographically by name
(values keep their list order) so the emitted document is
byte-deterministic; the live endpoint is order-insensitive. The five
XML-special characters are escaped in both names and values.

Responses carry the result grid in a ``data-table`` element whose rows
are ``<r>`` elements of ``<c>`` cells: ``l`` holds a label, ``v`` holds
a measure value, and an optional ``r`` attribute row-spans a label over
the following rows. Row spans are expanded during parsing so every
returned row is rectangular; a table that cannot be made rectangular is
a parse failure, never a ragged result. Column labels are not part of
the wire body, so callers that know their query pass them in;
otherwise positional names are synthesized.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import httpx

from epibrief.errors import (
    EmptyParameterNameError,
    MalformedXmlError,
    RestrictionsNotAcceptedError,
    ServerRejectedError,
    TransportError,
)

RESTRICTIONS_PARAMETER = "accept_datause_restrictions"

_ESCAPES = {
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
    "'": "&apos;",
}


def _escape(text: str) -> str:
    for char, entity in _ESCAPES.items():
        text = text.replace(char, entity)
    return text


@dataclass(frozen=True)
class WonderRequest:
    dataset_id: str
    parameters: dict[str, list[str]] = field(default_factory=dict)
    accept_datause_restrictions: bool = True

    def __post_init__(self):
        if not self.dataset_id:
            raise ValueError("dataset_id must be non-empty")


@dataclass(frozen=True)
class WonderTable:
    columns: list[str]
    rows: list[list[str]]
    footnotes: list[str]

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row {i} has {len(row)} cells, expected {len(self.columns)}"
                )


def build_request_xml(r: WonderRequest) -> str:
    """Emit the byte-deterministic request-parameters document."""
    if not r.accept_datause_restrictions:
        raise RestrictionsNotAcceptedError(
            "the endpoint requires accept_datause_restrictions=true"
        )
    if RESTRICTIONS_PARAMETER in r.parameters:
        raise ValueError(f"{RESTRICTIONS_PARAMETER} is injected; do not pass it")
    merged: dict[str, list[str]] = dict(r.parameters)
    merged[RESTRICTIONS_PARAMETER] = ["true"]
    lines = ["<request-parameters>"]
    for name in sorted(merged):
        if not name:
            raise EmptyParameterNameError("parameter names must be non-empty")
        for value in merged[name]:
            lines.append(
                f"<parameter><name>{_escape(name)}</name>"
                f"<value>{_escape(value)}</value></parameter>"
            )
    lines.append("</request-parameters>")
    return "\n".join(lines) + "\n"


def parse_request_xml(text: str) -> list[tuple[str, str]]:
    """Recover (name, value) pairs from a request document (test oracle
    for the escaping round trip)."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise MalformedXmlError(f"request document unparseable: {exc}") from exc
    pairs = []
    for param in root.findall("parameter"):
        name = param.findtext("name") or ""
        value = param.findtext("value") or ""
        pairs.append((name, value))
    return pairs


async def post_request(
    client: httpx.AsyncClient,
    r: WonderRequest,
    endpoints: dict[str, str],
) -> str:
    """POST the request document to the dataset's endpoint, return raw XML."""
    if r.dataset_id not in endpoints:
        raise ValueError(f"no endpoint configured for dataset {r.dataset_id!r}")
    payload = {
        "request_xml": build_request_xml(r),
        RESTRICTIONS_PARAMETER: "true",
    }
    for attempt in (0, 1):
        try:
            resp = await client.post(endpoints[r.dataset_id], data=payload)
            break
        except httpx.TransportError as exc:
            if attempt:
                raise TransportError(f"wonder request failed: {exc}") from exc
    if resp.status_code >= 400:
        raise TransportError(f"wonder endpoint returned {resp.status_code}")
    return resp.text


def parse_response_xml(body: str, columns: list[str] | None = None) -> WonderTable:
    """Extract the data table (row spans expanded) and footnotes."""
    try:
        root = ET.fromstring(body)
    except ET.ParseError as exc:
        raise MalformedXmlError(f"response unparseable: {exc}") from exc

    error_el = root.find(".//error")
    if error_el is not None:
        messages = [m.text or "" for m in error_el.findall("message")]
        if not messages and error_el.text and error_el.text.strip():
            messages = [error_el.text.strip()]
        raise ServerRejectedError(" ".join(messages) or "server rejected the request")

    table_el = root.find(".//data-table")
    if table_el is None:
        raise MalformedXmlError("response has no data-table element")

    row_elements = table_el.findall("r")
    records: list[list[str]] = []
    for row_idx, r_el in enumerate(row_elements):
        while len(records) <= row_idx:
            records.append([])
        for c_el in r_el.findall("c"):
            if "v" in c_el.attrib:
                records[row_idx].append(c_el.attrib["v"])
            elif "l" in c_el.attrib:
                span = int(c_el.attrib.get("r", "1"))
                for k in range(span):
                    while len(records) <= row_idx + k:
                        records.append([])
                    records[row_idx + k].append(c_el.attrib["l"])
            else:
                raise MalformedXmlError(
                    f"row {row_idx} has a cell with neither l nor v attribute"
                )
    if len(records) > len(row_elements):
        raise MalformedXmlError("row span extends past the last table row")

    widths = {len(row) for row in records}
    if len(widths) > 1:
        raise MalformedXmlError(f"ragged table: row widths {sorted(widths)}")
    width = widths.pop() if widths else 0

    if columns is None:
        columns = [f"Column {i}" for i in range(1, width + 1)]
    elif records and len(columns) != width:
        raise MalformedXmlError(
            f"{len(columns)} column labels for rows of width {width}"
        )

    footnotes = [
        f.text or "" for f in root.findall(".//footnotes/f")
    ]
    return WonderTable(columns=list(columns), rows=records, footnotes=footnotes)


def summarize_table(t: WonderTable, max_rows: int = 10) -> str:
    """Markdown rendering: header, up to max_rows rows, truncation note."""
    def cell(text: str) -> str:
        return text.replace("|", "\\|")

    lines = [
        "| " + " | ".join(cell(c) for c in t.columns) + " |",
        "| " + " | ".join("---" for _ in t.columns) + " |",
    ]
    for row in t.rows[:max_rows]:
        lines.append("| " + " | ".join(cell(v) for v in row) + " |")
    hidden = len(t.rows) - max_rows
    if hidden > 0:
        lines.append(f"({hidden} more rows)")
    return "\n".join(lines)
