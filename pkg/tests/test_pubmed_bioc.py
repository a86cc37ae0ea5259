import asyncio
import json
from pathlib import Path

import httpx
import pytest
from hypothesis import given, strategies as st

from epibrief.errors import (
    InvalidQueryError,
    MalformedEnvelopeError,
    NotBioCError,
    NotFoundError,
    SchemaViolationError,
    TransportError,
)
from epibrief.sources.pubmed_bioc import (
    BioCDocument,
    BioCPassage,
    TokenBucket,
    convert_bioc_xml_to_json,
    fetch_bioc,
    hit_from_document,
    parse_bioc_json,
    parse_bioc_xml,
    search,
    summarize_hits,
)
from conftest import golden_bytes, golden_text

DATA = Path(__file__).parents[1] / "src/epibrief/data/fixtures"
CORPUS = Path(__file__).parent / "fixtures" / "bioc_corpus"


def _client(handler):
    return httpx.AsyncClient(transport=httpx.MockTransport(handler))


class TestSearch:
    def test_fixture_ids_in_order(self):
        body = (DATA / "pubmed_esearch.json").read_text()

        def handler(request):
            assert request.url.params["db"] == "pubmed"
            assert request.url.params["retmode"] == "json"
            return httpx.Response(200, text=body)

        async def run():
            async with _client(handler) as client:
                return await search(client, "mpox clade Ib transmission", 10)

        ids = asyncio.run(run())
        assert len(ids) <= 10
        assert ids[:3] == ["41230117", "41198452", "41154783"]

    def test_empty_term_rejected(self):
        async def run():
            async with _client(lambda r: httpx.Response(200)) as client:
                await search(client, "  ", 10)

        with pytest.raises(InvalidQueryError):
            asyncio.run(run())

    def test_zero_max_results_precondition(self):
        async def run():
            async with _client(lambda r: httpx.Response(200)) as client:
                await search(client, "mpox", 0)

        with pytest.raises(ValueError):
            asyncio.run(run())

    def test_malformed_envelope(self):
        async def run():
            async with _client(lambda r: httpx.Response(200, text='{"nope": 1}')) as client:
                await search(client, "mpox", 5)

        with pytest.raises(MalformedEnvelopeError):
            asyncio.run(run())

    def test_http_error(self):
        async def run():
            async with _client(lambda r: httpx.Response(429, text="slow down")) as client:
                await search(client, "mpox", 5)

        with pytest.raises(TransportError):
            asyncio.run(run())


class TestFetchBioC:
    def test_fixture_document_invariants(self):
        body = (DATA / "bioc/pubmed_41230117.json").read_text()

        async def run():
            async with _client(lambda r: httpx.Response(200, text=body)) as client:
                return await fetch_bioc(client, "41230117")

        doc = asyncio.run(run())
        assert doc.doc_id == "41230117"
        assert len(doc.passages) >= 1
        offsets = [p.offset for p in doc.passages]
        assert offsets == sorted(set(offsets))

    def test_out_of_order_passages_rejected(self):
        body = json.dumps(
            {
                "documents": [
                    {
                        "id": "1",
                        "passages": [
                            {"offset": 50, "text": "b", "infons": {}},
                            {"offset": 0, "text": "a", "infons": {}},
                        ],
                    }
                ]
            }
        )

        async def run():
            async with _client(lambda r: httpx.Response(200, text=body)) as client:
                await fetch_bioc(client, "1")

        with pytest.raises(SchemaViolationError):
            asyncio.run(run())

    def test_unknown_id_404(self):
        async def run():
            async with _client(lambda r: httpx.Response(404, text="gone")) as client:
                await fetch_bioc(client, "99999999")

        with pytest.raises(NotFoundError):
            asyncio.run(run())

    def test_empty_collection_is_not_found(self):
        async def run():
            async with _client(
                lambda r: httpx.Response(200, text='{"documents": []}')
            ) as client:
                await fetch_bioc(client, "1")

        with pytest.raises(NotFoundError):
            asyncio.run(run())


class TestConvert:
    def test_minimal_golden_byte_exact(self):
        xml = golden_text("bioc_minimal.xml")
        assert convert_bioc_xml_to_json(xml).encode("utf-8") == golden_bytes(
            "bioc_minimal.json"
        )

    def test_zero_documents(self):
        out = convert_bioc_xml_to_json(
            "<collection><source>s</source><date>d</date><key>k</key></collection>"
        )
        assert json.loads(out)["documents"] == []

    def test_non_bioc_xml(self):
        with pytest.raises(NotBioCError):
            convert_bioc_xml_to_json("<html/>")

    def test_malformed_xml(self):
        from epibrief.errors import MalformedXmlError

        with pytest.raises(MalformedXmlError):
            convert_bioc_xml_to_json("<collection>")

    def test_conversion_idempotent_bytes(self):
        xml = (CORPUS / "corpus_unicode.xml").read_text(encoding="utf-8")
        assert convert_bioc_xml_to_json(xml) == convert_bioc_xml_to_json(xml)

    @pytest.mark.parametrize("path", sorted(CORPUS.glob("*.xml")), ids=lambda p: p.stem)
    def test_roundtrip_equivalence_on_corpus(self, path):
        xml = path.read_text(encoding="utf-8")
        via_json = parse_bioc_json(convert_bioc_xml_to_json(xml))
        direct = parse_bioc_xml(xml)
        assert via_json == direct

    def test_corpus_has_at_least_five_documents(self):
        total = sum(
            len(parse_bioc_xml(p.read_text(encoding="utf-8")))
            for p in CORPUS.glob("*.xml")
        )
        assert total >= 5


class TestOffsetInvariants:
    @given(
        st.lists(
            st.integers(min_value=0, max_value=10_000), min_size=1, max_size=8, unique=True
        )
    )
    def test_strictly_increasing_accepted_any_other_order_rejected(self, offsets):
        passages = tuple(BioCPassage(offset=o, text="x") for o in offsets)
        if list(offsets) == sorted(offsets):
            BioCDocument(doc_id="d", passages=passages)
        else:
            with pytest.raises(SchemaViolationError):
                BioCDocument(doc_id="d", passages=passages)

    def test_negative_offset_rejected(self):
        with pytest.raises(SchemaViolationError):
            BioCDocument(doc_id="d", passages=(BioCPassage(offset=-1, text="x"),))

    def test_equal_offsets_rejected(self):
        with pytest.raises(SchemaViolationError):
            BioCDocument(
                doc_id="d",
                passages=(BioCPassage(offset=5, text="a"), BioCPassage(offset=5, text="b")),
            )


class TestSummaries:
    def _doc(self):
        return parse_bioc_json((DATA / "bioc/pubmed_41230117.json").read_text())[0]

    def test_empty_input(self):
        assert summarize_hits([]) == ""

    def test_fixture_golden_bullet(self):
        doc = self._doc()
        hit = hit_from_document(doc, max_chars=60)
        assert summarize_hits([doc], max_chars=60) == (
            f"- {hit.title} — {hit.snippet} ({hit.url})"
        )
        assert hit.url == "https://pubmed.ncbi.nlm.nih.gov/41230117/"
        assert hit.title.startswith("Household transmission")

    def test_snippet_truncated_on_word_boundary(self):
        doc = BioCDocument(
            doc_id="7",
            passages=(
                BioCPassage(offset=0, text="Title here", infons={"type": "title"}),
                BioCPassage(
                    offset=20,
                    text="alpha beta gamma delta epsilon",
                    infons={"type": "abstract"},
                ),
            ),
        )
        hit = hit_from_document(doc, max_chars=17)
        assert hit.snippet == "alpha beta gamma..."
        assert len(hit.snippet) <= 17 + len("...")


class TestTokenBucket:
    def test_spaces_out_calls(self):
        async def run():
            bucket = TokenBucket(rate_per_sec=50.0, capacity=1.0)
            import time

            start = time.monotonic()
            for _ in range(4):
                await bucket.acquire()
            return time.monotonic() - start

        elapsed = asyncio.run(run())
        # 3 refills needed at 50/s -> at least ~60ms.
        assert elapsed >= 0.05

    def test_burst_within_capacity_is_immediate(self):
        async def run():
            bucket = TokenBucket(rate_per_sec=3.0)
            import time

            start = time.monotonic()
            for _ in range(3):
                await bucket.acquire()
            return time.monotonic() - start

        assert asyncio.run(run()) < 0.05
