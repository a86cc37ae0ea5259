"""Fixture-backed transport for mock mode.

``--mock`` runs swap the real network for an httpx ``MockTransport``
that serves recorded response bodies from the package's fixture
directory, routed by request URL. Tool code is unchanged; only the
transport differs, so mock runs exercise the same request-building and
parsing paths as live ones. Tests inject failures by overriding one
route with an error response.
"""

from __future__ import annotations

from pathlib import Path
from urllib.parse import urlsplit

import httpx

from epibrief.config import AppConfig, DATA_DIR

FIXTURE_DIR = DATA_DIR / "fixtures"

ROUTE_WHO = "who"
ROUTE_WONDER = "wonder"
ROUTE_PUBMED_SEARCH = "pubmed-search"
ROUTE_PUBMED_BIOC = "pubmed-bioc"


def _load(path: Path) -> bytes:
    return path.read_bytes()


def classify_route(config: AppConfig, request: httpx.Request) -> str | None:
    """Which fixture route serves this request, if any."""
    url = str(request.url.copy_with(query=None))
    if url == config.who.endpoint:
        return ROUTE_WHO
    if url in config.wonder.endpoints.values():
        return ROUTE_WONDER
    if url == config.pubmed.esearch_url:
        return ROUTE_PUBMED_SEARCH
    template_prefix = config.pubmed.bioc_url_template.split("{doc_id}", 1)[0]
    if url.startswith(template_prefix):
        return ROUTE_PUBMED_BIOC
    return None


def _bioc_doc_id(config: AppConfig, request: httpx.Request) -> str:
    prefix = config.pubmed.bioc_url_template.split("{doc_id}", 1)[0]
    rest = str(request.url.copy_with(query=None))[len(prefix):]
    return rest.split("/", 1)[0]


def build_fixture_transport(
    config: AppConfig,
    fixture_dir: Path = FIXTURE_DIR,
    overrides: dict[str, httpx.Response] | None = None,
) -> httpx.MockTransport:
    """Transport serving the recorded fixture corpus.

    ``overrides`` maps a route key (ROUTE_*) to a canned response,
    letting tests turn exactly one source into, say, an HTTP 500.
    """
    overrides = overrides or {}
    bodies = {
        ROUTE_WHO: _load(fixture_dir / "who_dons.json"),
        ROUTE_WONDER: _load(fixture_dir / "wonder_d76.xml"),
        ROUTE_PUBMED_SEARCH: _load(fixture_dir / "pubmed_esearch.json"),
    }

    def handler(request: httpx.Request) -> httpx.Response:
        route = classify_route(config, request)
        if route is None:
            host = urlsplit(str(request.url)).netloc
            return httpx.Response(404, text=f"no fixture route for {host}")
        if route in overrides:
            return overrides[route]
        if route == ROUTE_PUBMED_BIOC:
            doc_path = fixture_dir / "bioc" / f"pubmed_{_bioc_doc_id(config, request)}.json"
            if not doc_path.exists():
                return httpx.Response(404, text="article not found")
            return httpx.Response(200, content=_load(doc_path))
        return httpx.Response(200, content=bodies[route])

    return httpx.MockTransport(handler)


def failure_response(status: int = 500, text: str = "injected failure") -> httpx.Response:
    return httpx.Response(status, text=text)
