import pytest
from hypothesis import given, strategies as st

from epibrief.events import (
    KIND_BRIEFING,
    KIND_SOURCES,
    KIND_THOUGHT,
    NORMALIZED_AT,
    StreamEvent,
    load_transcript,
    normalize_timestamps,
    parse_envelope,
    serialize_envelope,
    serialize_sse,
    transcript,
    validate_sequence,
)
from conftest import DEMO_QUERY, golden_bytes, run_mock_investigation

AT = "2026-01-05T12:00:00+00:00"


def _event(seq, kind, payload, agent_id=None, session="fixture"):
    return StreamEvent(
        session_id=session, seq=seq, kind=kind, agent_id=agent_id, payload=payload, at=AT
    )


class TestConstruction:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            _event(0, "Nonsense", {})

    def test_missing_payload_key_rejected(self):
        with pytest.raises(ValueError):
            _event(0, "Thought", {})

    def test_agent_scoped_kind_requires_agent(self):
        with pytest.raises(ValueError):
            _event(0, "DelegationIssued", {"instruction": "x", "category": "Clinical"})

    def test_sources_entries_validated(self):
        with pytest.raises(ValueError):
            _event(0, "SourcesListed", {"sources": [{"url": "https://x"}]})

    def test_negative_seq_rejected(self):
        with pytest.raises(ValueError):
            _event(-1, "Thought", {"text": "hi"})


class TestSerializeSse:
    def test_framing_contract(self):
        text = serialize_sse(_event(0, KIND_THOUGHT, {"text": "hello"}))
        assert text.startswith('event: Thought\nid: 0\ndata: {"')
        assert text.endswith("}\n\n")
        assert text.count("\n\n") == 1

    def test_newline_in_payload_stays_on_one_data_line(self):
        text = serialize_sse(_event(0, KIND_THOUGHT, {"text": "two\nlines"}))
        data_lines = [l for l in text.split("\n") if l.startswith("data: ")]
        assert len(data_lines) == 1
        assert "\\n" in data_lines[0]

    def test_final_briefing_golden_bytes(self):
        event = _event(
            7,
            KIND_BRIEFING,
            {
                "markdown": "## Summary\nAll clear.",
                "metrics": {"words": 3, "source_count": 0},
                "degraded": False,
            },
        )
        assert serialize_sse(event).encode("utf-8") == golden_bytes("sse_final_briefing.txt")

    @given(
        st.lists(
            st.tuples(st.integers(min_value=0, max_value=50), st.text(max_size=20)),
            min_size=2,
            max_size=2,
        )
    )
    def test_injective_on_valid_events(self, pair):
        (seq1, text1), (seq2, text2) = pair
        e1 = _event(seq1, KIND_THOUGHT, {"text": text1})
        e2 = _event(seq2, KIND_THOUGHT, {"text": text2})
        if e1 != e2:
            assert serialize_sse(e1) != serialize_sse(e2)

    def test_envelope_roundtrip(self):
        event = _event(3, KIND_SOURCES, {"sources": [{"url": "https://a/b", "title": "t", "origin": "WHO"}]})
        assert parse_envelope(serialize_envelope(event)) == event


class TestNormalization:
    def test_only_timestamp_changes(self):
        event = _event(0, KIND_THOUGHT, {"text": "x"})
        normalized = normalize_timestamps([event])[0]
        assert normalized.at == NORMALIZED_AT
        assert normalized.payload == event.payload
        assert normalized.seq == event.seq

    def test_transcript_roundtrip(self, mock_runtime):
        events, _ = run_mock_investigation(mock_runtime)
        text = transcript(events)
        assert load_transcript(text) == events


class TestValidateSequence:
    def test_healthy_mock_trace_accepted(self, mock_runtime):
        events, _ = run_mock_investigation(mock_runtime)
        assert validate_sequence(events) is None

    def test_empty_trace(self):
        violation = validate_sequence([])
        assert violation is not None
        assert "missing Thought" in violation.message

    def test_briefing_before_findings(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(1, "IntentIdentified", {"intent": "i", "categories": ["Clinical"]}),
            _event(2, "DelegationIssued", {"instruction": "x", "category": "Clinical"}, "a"),
            _event(
                3,
                "FinalBriefing",
                {"markdown": "m", "metrics": {"words": 1, "source_count": 0}, "degraded": False},
            ),
        ]
        violation = validate_sequence(events)
        assert violation is not None and violation.index == 3

    def test_sequence_gap_detected(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(2, "IntentIdentified", {"intent": "i", "categories": []}),
        ]
        violation = validate_sequence(events)
        assert violation is not None and violation.index == 1
        assert "gap" in violation.message

    def test_unclosed_tool_call_rejected(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(1, "IntentIdentified", {"intent": "i", "categories": ["Clinical"]}),
            _event(2, "DelegationIssued", {"instruction": "x", "category": "Clinical"}, "a"),
            _event(3, "ToolInvoked", {"tool": "pubmed.literature", "input": "x"}, "a"),
            _event(
                4,
                "FindingReceived",
                {
                    "summary": "s",
                    "citations": [],
                    "risk_level": "Unknown",
                    "risk_basis": "",
                    "tool_calls_made": 1,
                },
                "a",
            ),
        ]
        violation = validate_sequence(events)
        assert violation is not None and violation.index == 4

    def test_truncated_trace_rejected(self, mock_runtime):
        events, _ = run_mock_investigation(mock_runtime)
        violation = validate_sequence(events[:-1])
        assert violation is not None
        assert violation.index == len(events) - 1

    def test_trailing_events_rejected(self, mock_runtime):
        events, _ = run_mock_investigation(mock_runtime)
        extra = StreamEvent(
            session_id=events[0].session_id,
            seq=len(events),
            kind="Thought",
            agent_id=None,
            payload={"text": "late"},
            at=AT,
        )
        violation = validate_sequence(events + [extra])
        assert violation is not None and violation.index == len(events)

    def test_interleaved_subtasks_accepted(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(1, "IntentIdentified", {"intent": "i", "categories": ["Clinical", "Regulatory"]}),
            _event(2, "DelegationIssued", {"instruction": "x", "category": "Clinical"}, "a"),
            _event(3, "DelegationIssued", {"instruction": "y", "category": "Regulatory"}, "b"),
            _event(4, "ToolInvoked", {"tool": "who.dons", "input": "y"}, "b"),
            _event(5, "ToolInvoked", {"tool": "pubmed.literature", "input": "x"}, "a"),
            _event(6, "ToolCompleted", {"tool": "pubmed.literature", "status": "ok", "summary": ""}, "a"),
            _event(7, "ToolCompleted", {"tool": "who.dons", "status": "ok", "summary": ""}, "b"),
            _event(
                8,
                "FindingReceived",
                {"summary": "s", "citations": [], "risk_level": "Low", "risk_basis": "", "tool_calls_made": 1},
                "b",
            ),
            _event(
                9,
                "FindingReceived",
                {"summary": "s", "citations": [], "risk_level": "Unknown", "risk_basis": "", "tool_calls_made": 1},
                "a",
            ),
            _event(
                10,
                "FinalBriefing",
                {"markdown": "m", "metrics": {"words": 1, "source_count": 0}, "degraded": False},
            ),
            _event(11, "SourcesListed", {"sources": []}),
        ]
        assert validate_sequence(events) is None

    def test_zero_subtask_trace_accepted(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(1, "IntentIdentified", {"intent": "i", "categories": []}),
            _event(
                2,
                "FinalBriefing",
                {"markdown": "m", "metrics": {"words": 1, "source_count": 0}, "degraded": True},
            ),
            _event(3, "SourcesListed", {"sources": []}),
        ]
        assert validate_sequence(events) is None

    def test_error_event_not_in_grammar(self):
        events = [
            _event(0, "Thought", {"text": "t"}),
            _event(1, "IntentIdentified", {"intent": "i", "categories": []}),
            _event(2, "Error", {"message": "boom"}),
        ]
        violation = validate_sequence(events)
        assert violation is not None and violation.index == 2
