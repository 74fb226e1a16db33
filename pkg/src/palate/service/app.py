"""HTTP facade over the session manager."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from ..errors import (
    ConcurrentStep,
    EmptyAfterFilter,
    PalateError,
    SelectionNotSubset,
    SessionCompleted,
    UnknownSession,
)
from ..nutrition import GoalProfile
from .config import ServiceConfig
from .sessions import SessionManager


class CreateSessionBody(BaseModel):
    diet: str
    calories: str
    protein: str
    fat: str
    seed: int | None = None


class ChoicesBody(BaseModel):
    selected: list[str] = Field(default_factory=list)


class VerdictsBody(BaseModel):
    verdicts: dict[str, bool]


def create_app(config: ServiceConfig, manager: SessionManager | None = None) -> FastAPI:
    app = FastAPI(title="palate", version="0.1.0")
    mgr = manager or SessionManager(config)
    app.state.manager = mgr

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            profile = GoalProfile.from_dict(body.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            step = mgr.create_session(profile, seed=body.seed)
        except EmptyAfterFilter as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except PalateError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        return {"session_id": step["session_id"], "step": step}

    @app.post("/sessions/{session_id}/choices")
    def submit_choices(session_id: str, body: ChoicesBody):
        try:
            result = mgr.submit_choices(session_id, body.selected)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except SelectionNotSubset as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except SessionCompleted as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ConcurrentStep as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        if result.get("status") == "completed":
            return result
        return {"session_id": session_id, "step": result}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            return mgr.get_session(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/sessions/{session_id}/evaluation")
    def get_evaluation(session_id: str):
        try:
            return mgr.get_evaluation(session_id)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except SessionCompleted as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.post("/sessions/{session_id}/verdicts")
    def post_verdicts(session_id: str, body: VerdictsBody):
        try:
            return mgr.post_verdicts(session_id, body.verdicts)
        except UnknownSession as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except SelectionNotSubset as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except SessionCompleted as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    return app
