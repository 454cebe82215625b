"""HTTP service exposing county data, tool dispatch, personas, and chat.

Endpoints
---------
- ``GET /healthz`` — liveness probe with the active chat-backend mode.
- ``GET /personas`` — the selectable stakeholder roles and their prompts.
- ``GET /counties/{name}`` — the full stored record for one county.
- ``POST /tools/{name}`` — direct tool dispatch; body is the argument object.
- ``POST /chat`` — one agent exchange: ``{message, persona, session_id?}`` →
  ``{transcript_id, answer, tool_trace, ...}``.

Sessions keep their full message history per ``session_id``: a follow-up
message in the same session is answered with the earlier exchanges in
context.  Each session is strictly sequential (guarded by a per-session
lock); distinct sessions are served concurrently over the same read-only
store and tool registry.

The chat backend is chosen at app-construction time: a scripted mock when a
script path is supplied, otherwise a remote chat-completion endpoint when
``CHAT_ENDPOINT_URL`` is set (with ``CHAT_API_KEY``, ``CHAT_MODEL`` and
``CHAT_TIMEOUT_S`` honoured), otherwise chat is disabled and ``POST /chat``
returns 503 while the data endpoints keep working.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from typing import Mapping

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .agent import (
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TIMEOUT_S,
    HttpBackend,
    MockBackend,
    PERSONAS,
    build_tool_registry,
    get_persona,
    run_agent,
)
from .errors import (
    BackendError,
    CountyNotFound,
    DataError,
    MockScriptExhausted,
    NoTillageData,
    SoilCopilotError,
    ToolArgumentError,
    UnknownTool,
)
from .knowledge import KnowledgeIndex
from .store import AgroStore

__all__ = ["ChatRequest", "create_app", "serve"]

# Most specific first; the first matching class decides the HTTP status.
_ERROR_STATUS: tuple[tuple[type, int], ...] = (
    (ToolArgumentError, 400),
    (UnknownTool, 404),
    (CountyNotFound, 404),
    (NoTillageData, 404),
    (MockScriptExhausted, 502),
    (BackendError, 502),
    (DataError, 400),
)


def _status_for(exc: Exception) -> int:
    for cls, status in _ERROR_STATUS:
        if isinstance(exc, cls):
            return status
    return 500


class ChatRequest(BaseModel):
    message: str
    persona: str = "default"
    session_id: str | None = None


@dataclass
class _Session:
    persona: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    messages: list = field(default_factory=list)
    exchanges: int = 0


def create_app(
    store: AgroStore,
    knowledge_index: KnowledgeIndex,
    *,
    tillage_outputs: Mapping[str, float] | None = None,
    mock_script: str | os.PathLike | None = None,
    env: Mapping[str, str] | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> FastAPI:
    """Build the service over an ingested store and a built knowledge index."""
    env = os.environ if env is None else env
    registry = build_tool_registry(store, knowledge_index, tillage_outputs)

    if mock_script is not None:
        # Validate the script once up front; each chat replays it afresh so
        # every request is deterministic and independent of earlier ones.
        MockBackend.from_file(mock_script)
        backend_mode = "mock"

        def new_backend():
            return MockBackend.from_file(mock_script)

    elif env.get("CHAT_ENDPOINT_URL"):
        shared = HttpBackend(
            env["CHAT_ENDPOINT_URL"],
            api_key=env.get("CHAT_API_KEY"),
            model=env.get("CHAT_MODEL"),
            timeout_s=float(env.get("CHAT_TIMEOUT_S", DEFAULT_TIMEOUT_S)),
        )
        backend_mode = "remote"

        def new_backend():
            return shared

    else:
        backend_mode = "disabled"
        new_backend = None

    app = FastAPI(title="soilcopilot", version=__version__)
    # The browser UI is a static page that may be served from any origin;
    # the API carries no credentials, so open CORS is safe here.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.sessions = {}
    app.state.sessions_lock = threading.Lock()
    app.state.anonymous_count = 0
    app.state.backend_mode = backend_mode

    @app.exception_handler(SoilCopilotError)
    def _domain_error(request, exc: SoilCopilotError):
        return JSONResponse(
            status_code=_status_for(exc),
            content={"detail": str(exc), "error_type": type(exc).__name__},
        )

    @app.exception_handler(ValueError)
    def _value_error(request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"detail": str(exc), "error_type": "ValueError"},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "version": __version__,
                "backend": backend_mode}

    @app.get("/personas")
    def personas():
        return {"personas": [
            {"role": p.role, "system_prompt": p.system_prompt}
            for p in PERSONAS.values()
        ]}

    @app.get("/counties/{name}")
    def county(name: str):
        return store.county_record(name).to_dict()

    @app.post("/tools/{name}")
    def call_tool(name: str, args: dict | None = Body(default=None)):
        return registry.invoke(name, args if args is not None else {})

    @app.post("/chat")
    def chat(request: ChatRequest):
        persona = get_persona(request.persona)
        if new_backend is None:
            raise HTTPException(
                status_code=503,
                detail="no chat backend configured: start the service with "
                       "a mock script or set CHAT_ENDPOINT_URL",
            )

        with app.state.sessions_lock:
            if request.session_id is None:
                app.state.anonymous_count += 1
                session_id = f"session-{app.state.anonymous_count}"
            else:
                session_id = request.session_id
            session = app.state.sessions.setdefault(
                session_id, _Session(persona=persona.role))

        with session.lock:
            if session.exchanges and session.persona != persona.role:
                raise HTTPException(
                    status_code=400,
                    detail=f"session {session_id!r} was started with persona "
                           f"{session.persona!r}; start a new session to "
                           f"switch roles",
                )
            transcript = run_agent(
                request.message, persona, new_backend(), registry,
                max_iterations=max_iterations, session_id=session_id,
                prior_messages=session.messages or None,
            )
            session.messages = transcript.wire_messages
            session.exchanges += 1
            transcript_id = f"{session_id}-{session.exchanges}"

        return {
            "transcript_id": transcript_id,
            "session_id": session_id,
            "persona": transcript.persona,
            "answer": transcript.answer,
            "tool_trace": transcript.tool_trace(),
            "truncated": transcript.truncated,
        }

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted.

    Uvicorn's graceful shutdown waits for in-flight requests, so active
    chats drain before the process exits.
    """
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")
