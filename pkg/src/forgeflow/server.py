"""Headless HTTP facade over the engine.

Every mutating endpoint delegates to exactly one engine operation; the server
adds no business logic of its own.  Job events are streamed with server-sent
events framing so clients get live feedback and can replay from any sequence
number.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .engine import Engine
from .errors import (
    ForgeflowError,
    IllegalTransition,
    InvalidDescriptor,
    InvalidProject,
    PathEscape,
    UnknownAction,
    UnknownEntry,
    UnknownItem,
    UnknownJob,
    UnknownType,
    WrongState,
)
from .model import Form

DEFAULT_PORT = 8700

_NOT_FOUND = (UnknownItem, UnknownType, UnknownJob, UnknownAction)
_CONFLICT = (WrongState, IllegalTransition)
_UNPROCESSABLE = (InvalidProject, InvalidDescriptor, UnknownEntry, PathEscape)


@dataclass
class ApiConfig:
    workspace: str
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    token: str | None = None


def create_app(engine: Engine, token: str | None = None) -> FastAPI:
    app = FastAPI(title="forgeflow", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if token and request.url.path != "/health":
            header = request.headers.get("authorization", "")
            if header != f"Bearer {token}":
                return JSONResponse({"error": "unauthorized"}, status_code=401)
        return await call_next(request)

    @app.exception_handler(ForgeflowError)
    async def engine_error(request: Request, exc: ForgeflowError):
        if isinstance(exc, _NOT_FOUND):
            code = 404
        elif isinstance(exc, _CONFLICT):
            code = 409
        elif isinstance(exc, _UNPROCESSABLE):
            code = 422
        else:
            code = 500
        return JSONResponse(
            {"error": type(exc).__name__, "detail": str(exc)}, status_code=code
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/types")
    def types():
        return [
            {"type_id": t, "display_name": n} for t, n in engine.list_item_types()
        ]

    @app.post("/items", status_code=201)
    def create_item(body: dict):
        item = engine.create_item(
            body.get("type_id", ""), body.get("project", ""), body.get("name", "")
        )
        return item.to_dict()

    @app.get("/items")
    def list_items():
        return [i.to_dict() for i in engine.list_items()]

    @app.get("/items/{item_id}")
    def get_item(item_id: str):
        return engine.get_item(item_id).to_dict()

    @app.get("/items/{item_id}/form")
    def get_form(item_id: str):
        return engine.get_item(item_id).form.to_dict()

    @app.put("/items/{item_id}/form")
    def put_form(item_id: str, body: dict):
        status = engine.review_form(item_id, Form.from_dict(body))
        code = 200 if status.accepted else 422
        return JSONResponse(status.to_dict(), status_code=code)

    @app.post("/items/{item_id}/process")
    def process(item_id: str, body: dict):
        ticket = engine.process_item(item_id, body.get("action", ""))
        return {
            "ticket_id": ticket.ticket_id,
            "item_id": item_id,
            "state": engine.get_item(item_id).state.value,
        }

    @app.post("/items/{item_id}/cancel")
    def cancel(item_id: str):
        state = engine.cancel_item(item_id)
        return {"item_id": item_id, "state": state.value}

    @app.get("/items/{item_id}/status")
    def status(item_id: str):
        return engine.status_snapshot(item_id)

    @app.get("/jobs/{job_id}/events")
    def events(job_id: str, from_seq: int = 0):
        engine.jobs.poll(job_id)  # 404 before the stream starts

        def sse():
            for ev in engine.jobs.stream_events(job_id, from_seq, follow=True):
                yield f"data: {json.dumps(ev.to_dict(), sort_keys=True)}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    return app


def serve(cfg: ApiConfig):
    """Blocking entry point used by the CLI ``serve`` subcommand."""
    import uvicorn

    if not Path(cfg.workspace).is_dir():
        raise ForgeflowError(f"workspace not found: {cfg.workspace}")
    engine = Engine(cfg.workspace)
    app = create_app(engine, token=cfg.token)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
