"""HTTP service exposing the embed / generate / score protocol.

Contracts:

    POST /embed    {"texts": [str, ...]}                    -> {"vectors": [[f, ...], ...], "dim": int}
    POST /generate {"prompt": str, "max_new_tokens": int}   -> {"text": str}
    POST /score    {"pairs": [{"candidate", "reference"}], "metric": str}
                                                            -> {"scores": [f, ...], "range": [lo, hi]}
    GET  /health                                            -> {"status": "ok", "models": {...}}

Batch outputs always keep the order of their inputs. Error codes: 400
malformed body, 422 empty text, 503 models not loaded, 504 generation
timeout.
"""

from __future__ import annotations

import asyncio

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .models import SCORE_RANGE, StubModels


class EmbedRequest(BaseModel):
    texts: list[str]


class GenerateRequest(BaseModel):
    prompt: str
    max_new_tokens: int = Field(default=64, ge=1)
    seed: int | None = None


class ScorePair(BaseModel):
    candidate: str
    reference: str


class ScoreRequest(BaseModel):
    pairs: list[ScorePair]
    metric: str = "token_overlap"


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(models=None, defer_load: bool = False, generate_timeout: float = 30.0) -> FastAPI:
    """Build the service; ``defer_load`` leaves models unloaded (503s)."""
    app = FastAPI(title="kpa-bridge")
    app.state.models = None if defer_load else (models or StubModels())
    app.state.generate_timeout = generate_timeout

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed body: {exc.errors()[:1]}")

    def require_models():
        if app.state.models is None:
            return _error(503, "models not loaded")
        return None

    @app.get("/health")
    async def health():
        if app.state.models is None:
            return _error(503, "models not loaded")
        return {"status": "ok", "models": app.state.models.identifiers}

    @app.post("/embed")
    async def embed(request: EmbedRequest):
        unavailable = require_models()
        if unavailable:
            return unavailable
        if not request.texts:
            return _error(422, "empty text batch")
        if any(not text.strip() for text in request.texts):
            return _error(422, "empty text in batch")
        vectors = app.state.models.embed(request.texts)
        return {"vectors": vectors, "dim": len(vectors[0])}

    @app.post("/generate")
    async def generate(request: GenerateRequest):
        unavailable = require_models()
        if unavailable:
            return unavailable
        if not request.prompt.strip():
            return _error(422, "empty prompt")
        loop = asyncio.get_running_loop()
        try:
            text = await asyncio.wait_for(
                loop.run_in_executor(
                    None,
                    app.state.models.generate,
                    request.prompt,
                    request.max_new_tokens,
                    request.seed,
                ),
                timeout=app.state.generate_timeout,
            )
        except asyncio.TimeoutError:
            return _error(504, "generation timed out")
        return {"text": text}

    @app.post("/score")
    async def score(request: ScoreRequest):
        unavailable = require_models()
        if unavailable:
            return unavailable
        if not request.pairs:
            return _error(422, "empty pair batch")
        if any(not p.candidate.strip() or not p.reference.strip() for p in request.pairs):
            return _error(422, "empty text in pair")
        try:
            scores = app.state.models.score(
                [(p.candidate, p.reference) for p in request.pairs], request.metric
            )
        except ValueError as exc:
            return _error(400, str(exc))
        return {"scores": scores, "range": list(SCORE_RANGE)}

    return app
