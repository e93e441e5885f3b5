"""HTTP service exposing fill-mask inference over the infill wire protocol.

POST /infill takes {tokens, mask_positions, top_k, forbid} and resolves the
masks left to right: each mask gets the backend's top-(top_k + |forbid|)
guesses, forbidden and subword-artifact tokens are dropped, the surviving
top_k are returned with descending scores, and the best one is substituted
into the sequence before the next mask is scored.
"""

from __future__ import annotations

import argparse
import logging
from contextlib import asynccontextmanager
from typing import Annotated

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backend import MASK_SENTINEL, BackendError, FillMaskBackend, build_backend
from .config import ServiceConfig

logger = logging.getLogger(__name__)

_SUBWORD_PREFIXES = ("##", "▁", "Ġ")
_SUBWORD_SUFFIXES = ("@@",)


class InfillBody(BaseModel):
    tokens: list[str]
    mask_positions: list[int]
    top_k: Annotated[int, Field(ge=1)] = 5
    forbid: dict[str, list[str]] = Field(default_factory=dict)


def is_subword_artifact(token: str) -> bool:
    """Continuation pieces from wordpiece/BPE vocabularies, never whole words."""
    return token.startswith(_SUBWORD_PREFIXES) or token.endswith(_SUBWORD_SUFFIXES)


def _usable(token: str, forbidden: set[str]) -> bool:
    return (
        bool(token)
        and not token.isspace()
        and MASK_SENTINEL not in token
        and not is_subword_artifact(token)
        and token.lower() not in forbidden
    )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    config: ServiceConfig | None = None, backend: FillMaskBackend | None = None
) -> FastAPI:
    """Build the service; a preconstructed backend skips startup loading."""
    cfg = config or ServiceConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if app.state.backend is None:
            app.state.backend = build_backend(cfg.model)
            logger.info("loaded model %s", app.state.backend.name)
        yield

    app = FastAPI(lifespan=lifespan)
    app.state.backend = backend
    app.state.config = cfg

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:3]}")

    @app.get("/health")
    async def health():
        current = app.state.backend
        if current is None or not current.ready:
            return _error(503, "model is loading")
        return {"status": "ok", "model": current.name}

    @app.post("/infill")
    async def infill(body: InfillBody):
        current = app.state.backend
        if current is None or not current.ready:
            return _error(503, "model is loading")

        if len(body.tokens) > cfg.max_sequence_tokens:
            return _error(
                413,
                f"sequence of {len(body.tokens)} tokens exceeds limit "
                f"{cfg.max_sequence_tokens}",
            )
        if body.top_k > cfg.max_top_k:
            return _error(400, f"top_k {body.top_k} exceeds limit {cfg.max_top_k}")

        sentinel_positions = [
            i for i, tok in enumerate(body.tokens) if tok == MASK_SENTINEL
        ]
        if body.mask_positions != sentinel_positions:
            return _error(
                422,
                f"mask_positions {body.mask_positions} do not match sentinel "
                f"positions {sentinel_positions}",
            )
        listed = {str(pos) for pos in body.mask_positions}
        unknown = sorted(set(body.forbid) - listed)
        if unknown:
            return _error(400, f"forbid keys {unknown} are not mask positions")

        working = list(body.tokens)
        candidates: dict[str, list[dict]] = {}
        for position in body.mask_positions:
            forbidden = {w.lower() for w in body.forbid.get(str(position), [])}
            try:
                raw = current.candidates(working, position, body.top_k + len(forbidden))
            except BackendError as exc:
                return _error(500, f"model failure: {exc}")
            kept = [(tok, score) for tok, score in raw if _usable(tok, forbidden)]
            kept = kept[: body.top_k]
            candidates[str(position)] = [
                {"token": tok, "score": score} for tok, score in kept
            ]
            if kept:
                working[position] = kept[0][0]
        return {"candidates": candidates}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mlm-service", description="Fill-mask infill microservice"
    )
    env = ServiceConfig.from_env()
    parser.add_argument("--model", default=env.model)
    parser.add_argument("--host", default=env.host)
    parser.add_argument("--port", type=int, default=env.port)
    parser.add_argument("--max-top-k", type=int, default=env.max_top_k)
    parser.add_argument("--max-sequence-tokens", type=int, default=env.max_sequence_tokens)
    args = parser.parse_args(argv)

    import uvicorn

    cfg = ServiceConfig(
        model=args.model,
        host=args.host,
        port=args.port,
        max_top_k=args.max_top_k,
        max_sequence_tokens=args.max_sequence_tokens,
    )
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
