"""Session registry and append-only event persistence.

Each session owns one NDJSON log file (one canonical event envelope per
line). The write path is write-ahead: an event is flushed to disk
before it lands in the in-memory list that subscribers read, so the log
on disk always replays to exactly the events a consumer could have
seen. Sessions are single-writer for events; any number of SSE readers
tail the in-memory list concurrently, woken through a per-session
asyncio event.
"""

from __future__ import annotations

import asyncio
import logging
import uuid
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import AsyncIterator

from epibrief.errors import (
    EmptyQueryError,
    NotReadyError,
    UnknownScenarioError,
    UnknownSessionError,
)
from epibrief.events import (
    KIND_ERROR,
    KIND_SOURCES,
    StreamEvent,
    serialize_envelope,
    serialize_sse,
)
from epibrief.report import Briefing
from epibrief.runtime import Runtime

logger = logging.getLogger(__name__)

STATE_RUNNING = "Running"
STATE_COMPLETE = "Complete"
STATE_FAILED = "Failed"


@dataclass
class Session:
    session_id: str
    query: str
    scenario_id: str
    log_path: Path
    state: str = STATE_RUNNING
    events: list[StreamEvent] = dc_field(default_factory=list)
    briefing: Briefing | None = None
    failure: str | None = None
    changed: asyncio.Event = dc_field(default_factory=asyncio.Event)
    task: asyncio.Task | None = None

    def notify(self):
        # Fresh Event per notification; the old one stays set forever, so
        # a reader that grabbed it before this change can never miss the
        # wakeup (no clear(), no lost-wakeup races between readers).
        waiters = self.changed
        self.changed = asyncio.Event()
        waiters.set()

    def append(self, event: StreamEvent):
        # Durable append first, then publish to readers.
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(serialize_envelope(event) + "\n")
            fh.flush()
        self.events.append(event)
        self.notify()


class SessionStore:
    def __init__(self, runtime: Runtime, data_dir: Path):
        self._runtime = runtime
        self._data_dir = Path(data_dir)
        self._data_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, Session] = {}

    @property
    def runtime(self) -> Runtime:
        return self._runtime

    def create(self, query: str, scenario_id: str) -> Session:
        if not query.strip():
            raise EmptyQueryError("query is blank")
        if scenario_id not in self._runtime.orchestrator.scenarios:
            raise UnknownScenarioError(f"unknown scenario: {scenario_id}")
        session_id = uuid.uuid4().hex
        session = Session(
            session_id=session_id,
            query=query.strip(),
            scenario_id=scenario_id,
            log_path=self._data_dir / f"{session_id}.ndjson",
        )
        self._sessions[session_id] = session
        session.task = asyncio.get_running_loop().create_task(self._run(session))
        return session

    async def _run(self, session: Session):
        try:
            briefing = await self._runtime.orchestrator.run_investigation(
                session.query,
                session.scenario_id,
                sinks=[session.append],
                session_id=session.session_id,
            )
            session.briefing = briefing
            session.state = STATE_COMPLETE
        except Exception as exc:  # noqa: BLE001 - session must reach a terminal state
            logger.exception("session %s failed", session.session_id)
            session.failure = str(exc)
            session.state = STATE_FAILED
        finally:
            session.notify()

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"unknown session: {session_id}")
        return session

    def list(self) -> list[Session]:
        return list(self._sessions.values())

    def briefing(self, session_id: str) -> Briefing:
        session = self.get(session_id)
        if session.state == STATE_RUNNING:
            raise NotReadyError(f"session {session_id} is still running")
        if session.state == STATE_FAILED:
            raise InvestigationFailed(session.failure or "investigation failed")
        assert session.briefing is not None
        return session.briefing

    async def stream(self, session_id: str, from_seq: int = 0) -> AsyncIterator[str]:
        """Replay events with seq >= from_seq, then live-tail to the end.

        The stream closes after the terminal event (SourcesListed on
        completion, Error on failure) or once a finished session has no
        more events to deliver.
        """
        session = self.get(session_id)
        index = from_seq
        while True:
            while index < len(session.events):
                event = session.events[index]
                index += 1
                yield serialize_sse(event)
                if event.kind in (KIND_SOURCES, KIND_ERROR):
                    return
            if session.state != STATE_RUNNING:
                return
            waiter = session.changed
            if index < len(session.events) or session.state != STATE_RUNNING:
                continue
            await waiter.wait()


class InvestigationFailed(Exception):
    """Raised when a briefing is requested from a failed session."""
