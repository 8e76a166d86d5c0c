"""HTTP service exposing the reasoning and scoring wire protocols.

The service exists so the ``http:`` backends have a real counterpart: it
answers ``POST /reason`` from a scenario file (the same format the mock
backend replays) and ``POST /score`` from a pinned score table. That makes it
a drop-in stand-in for a hosted model endpoint in integration setups.
"""
from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .errors import ScenarioError, ValidationError
from .reasoning import MockReasoner, ReasonRequest


class ReasonRequestBody(BaseModel):
    role: str
    prompt: str
    attachments: list[str] = Field(default_factory=list)


class ReasonResponseBody(BaseModel):
    text: str


class ScoreRequestBody(BaseModel):
    video_id: str = ""
    question: str = ""
    vectors: list[list[float]]


class ScoreResponseBody(BaseModel):
    scores: list[float]


def load_score_table(path: str | Path) -> dict[str, list[float]]:
    """Read a JSON object mapping video_id to a per-frame score list."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValidationError(f"score table {path} must be a JSON object")
    table = {}
    for video_id, scores in data.items():
        if not isinstance(scores, list):
            raise ValidationError(f"scores for {video_id!r} must be a list")
        table[str(video_id)] = [float(x) for x in scores]
    return table


def create_app(
    scenario_path: str | Path | None = None,
    scores_path: str | Path | None = None,
) -> FastAPI:
    reasoner = MockReasoner.from_file(scenario_path) if scenario_path else None
    score_table = load_score_table(scores_path) if scores_path else {}

    app = FastAPI(title="vidthinker service", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/reason", response_model=ReasonResponseBody)
    def reason(body: ReasonRequestBody) -> ReasonResponseBody:
        if reasoner is None:
            raise HTTPException(status_code=503, detail="no scenario configured")
        try:
            request = ReasonRequest(body.role, body.prompt, tuple(body.attachments))
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            return ReasonResponseBody(text=reasoner.complete(request))
        except ScenarioError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/score", response_model=ScoreResponseBody)
    def score(body: ScoreRequestBody) -> ScoreResponseBody:
        if not body.vectors:
            raise HTTPException(status_code=422, detail="vectors must be non-empty")
        width = len(body.vectors[0])
        if width < 1 or any(len(row) != width for row in body.vectors):
            raise HTTPException(status_code=422, detail="vectors must be rectangular")
        if body.video_id not in score_table:
            raise HTTPException(
                status_code=404, detail=f"no pinned scores for {body.video_id!r}"
            )
        return ScoreResponseBody(scores=score_table[body.video_id])

    return app
