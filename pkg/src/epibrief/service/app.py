"""HTTP service: sessions, live SSE event streams, scenarios, briefings.

Endpoints:

* ``POST /api/sessions`` ``{query, scenario_id}`` starts an
  investigation and returns the session id immediately.
* ``GET /api/sessions`` lists sessions.
* ``GET /api/sessions/{id}/events`` streams the session's events as SSE,
  replaying from ``from_seq`` (or the standard ``Last-Event-ID`` header
  plus one) and live-tailing until the final briefing and source list
  are delivered. Reconnecting with the last seen id resumes gaplessly.
* ``GET /api/sessions/{id}/briefing`` returns the finished briefing
  (409 while running, 410 when failed).
* ``GET /api/scenarios`` lists the loaded model configurations.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from epibrief import __version__
from epibrief.config import AppConfig
from epibrief.errors import (
    EmptyQueryError,
    NotReadyError,
    UnknownScenarioError,
    UnknownSessionError,
)
from epibrief.report import briefing_markdown, briefing_sidecar
from epibrief.runtime import Runtime, build_runtime
from epibrief.service.sessions import InvestigationFailed, SessionStore


class CreateSessionRequest(BaseModel):
    query: str
    scenario_id: str = "s1"


class CreateSessionResponse(BaseModel):
    session_id: str


class SessionSummary(BaseModel):
    session_id: str
    query: str
    scenario_id: str
    state: str
    event_count: int


class ScenarioModel(BaseModel):
    model_id: str
    temperature: float
    temperature_fixed: bool


class ScenarioSummary(BaseModel):
    scenario_id: str
    name: str
    manager: ScenarioModel
    agents: dict[str, ScenarioModel]


class BriefingSection(BaseModel):
    heading: str
    body: str


class BriefingResponse(BaseModel):
    query: str
    degraded: bool
    markdown: str
    sections: list[BriefingSection]
    sources: list[dict]
    metrics: dict


def create_app(config: AppConfig | None = None, runtime: Runtime | None = None) -> FastAPI:
    config = config or AppConfig()
    runtime = runtime or build_runtime(config)
    store = SessionStore(runtime, config.data_dir)

    app = FastAPI(title="epibrief", version=__version__)
    app.state.store = store
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.post("/api/sessions", response_model=CreateSessionResponse)
    async def create_session(body: CreateSessionRequest) -> CreateSessionResponse:
        try:
            session = store.create(body.query, body.scenario_id)
        except EmptyQueryError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except UnknownScenarioError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return CreateSessionResponse(session_id=session.session_id)

    @app.get("/api/sessions", response_model=list[SessionSummary])
    async def list_sessions() -> list[SessionSummary]:
        return [
            SessionSummary(
                session_id=s.session_id,
                query=s.query,
                scenario_id=s.scenario_id,
                state=s.state,
                event_count=len(s.events),
            )
            for s in store.list()
        ]

    @app.get("/api/sessions/{session_id}/events")
    async def stream_events(session_id: str, request: Request, from_seq: int = 0):
        last_event_id = request.headers.get("Last-Event-ID")
        if last_event_id is not None:
            try:
                from_seq = int(last_event_id) + 1
            except ValueError as exc:
                raise HTTPException(status_code=400, detail="bad Last-Event-ID") from exc
        try:
            store.get(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return StreamingResponse(
            store.stream(session_id, from_seq),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-store", "X-Accel-Buffering": "no"},
        )

    @app.get("/api/sessions/{session_id}/briefing", response_model=BriefingResponse)
    async def get_briefing(session_id: str) -> BriefingResponse:
        try:
            briefing = store.briefing(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except NotReadyError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except InvestigationFailed as exc:
            raise HTTPException(status_code=410, detail=str(exc)) from exc
        sidecar = briefing_sidecar(briefing)
        return BriefingResponse(
            query=briefing.query,
            degraded=briefing.degraded,
            markdown=briefing_markdown(briefing),
            sections=[BriefingSection(heading=h, body=b) for h, b in briefing.sections],
            sources=sidecar["sources"],
            metrics=sidecar["metrics"],
        )

    @app.get("/api/scenarios", response_model=list[ScenarioSummary])
    async def list_scenarios() -> list[ScenarioSummary]:
        def model(cfg) -> ScenarioModel:
            return ScenarioModel(
                model_id=cfg.model_id,
                temperature=cfg.temperature,
                temperature_fixed=cfg.temperature_fixed,
            )

        return [
            ScenarioSummary(
                scenario_id=s.scenario_id,
                name=s.name,
                manager=model(s.manager),
                agents={aid: model(cfg) for aid, cfg in sorted(s.agents.items())},
            )
            for _, s in sorted(runtime.orchestrator.scenarios.items())
        ]

    webui = config.webui_dir
    if webui is not None and Path(webui).is_dir():
        app.mount("/", StaticFiles(directory=str(webui), html=True), name="webui")

    return app
