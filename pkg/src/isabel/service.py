"""HTTP front end over the pipeline.

The loaded graph, fitted vectorizer and thresholds travel together in one
immutable `PipelineConfig`. A reload builds a complete replacement off to
the side and installs it with a single reference assignment, and every
request reads that reference exactly once, so no request can ever observe
half of an old graph and half of a new one.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path

from starlette.applications import Starlette
from starlette.requests import Request
from starlette.responses import JSONResponse, Response
from starlette.routing import Route

from .kg import KgError, load_kg, validate_kg
from .linking import DEFAULT_K, DEFAULT_TAU
from .pipeline import (
    MAX_INPUT_CHARS,
    InputTooLong,
    JsonlSink,
    PipelineConfig,
    result_to_json_bytes,
    run,
)
from .text import LexiconError, load_lexicon

__all__ = ["SnapshotError", "ServiceState", "load_snapshot", "build_app", "serve"]

DEFAULT_PORT = 8763


class SnapshotError(ValueError):
    """A snapshot could not be built; the previous one stays in service."""


def load_snapshot(
    kg_path: str | Path,
    lexicon_path: str | Path,
    tau: float = DEFAULT_TAU,
    k: int = DEFAULT_K,
) -> PipelineConfig:
    """Read, parse, validate and index a graph; all-or-nothing."""
    try:
        lexicon = load_lexicon(Path(lexicon_path).read_bytes())
        kg = load_kg(Path(kg_path).read_bytes(), lexicon)
    except (OSError, LexiconError, KgError) as exc:
        raise SnapshotError(str(exc)) from exc
    report = validate_kg(kg)
    if not report.ok:
        details = "; ".join(f"{f.kind}[{f.subject}]: {f.detail}" for f in report.findings)
        raise SnapshotError(f"graph failed validation: {details}")
    return PipelineConfig.from_kg(kg, tau=tau, k=k)


class ServiceState:
    """Mutable holder for the current snapshot plus reload bookkeeping."""

    def __init__(
        self,
        kg_path: str | Path,
        lexicon_path: str | Path,
        sink: JsonlSink | None = None,
        tau: float = DEFAULT_TAU,
        k: int = DEFAULT_K,
    ):
        self.kg_path = Path(kg_path)
        self.lexicon_path = Path(lexicon_path)
        self.sink = sink
        self.tau = tau
        self.k = k
        self.config: PipelineConfig | None = None
        self._reload_lock = threading.Lock()

    def reload(self) -> PipelineConfig:
        """Build a fresh snapshot and swap it in atomically."""
        with self._reload_lock:
            config = load_snapshot(self.kg_path, self.lexicon_path, self.tau, self.k)
            self.config = config
            return config


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def build_app(state: ServiceState) -> Starlette:
    async def link(request: Request) -> Response:
        config = state.config  # one read per request; see module docstring
        body = await request.body()
        try:
            decoded = body.decode("utf-8")
        except UnicodeDecodeError:
            return _error(422, "request body is not valid UTF-8")
        try:
            payload = json.loads(decoded)
        except json.JSONDecodeError:
            return _error(400, "request body is not valid JSON")
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            return _error(400, 'expected a JSON object with a string "text" field')
        text = payload["text"]
        if len(text) > MAX_INPUT_CHARS:
            return _error(413, f"input is {len(text)} characters, limit is {MAX_INPUT_CHARS}")
        if config is None:
            return _error(503, "knowledge graph is not loaded")
        try:
            result = run(text, config, sink=state.sink)
        except InputTooLong as exc:
            return _error(413, str(exc))
        return Response(result_to_json_bytes(result), media_type="application/json")

    async def packages(request: Request) -> Response:
        config = state.config
        if config is None:
            return _error(503, "knowledge graph is not loaded")
        listing = [
            {
                "id": p.id,
                "name": p.display_name,
                "members": sorted(p.members),
            }
            for p in (config.kg.packages[pid] for pid in sorted(config.kg.packages))
        ]
        return JSONResponse({"packages": listing})

    async def health(request: Request) -> Response:
        config = state.config
        if config is None:
            return JSONResponse({"status": "unavailable"}, status_code=503)
        return JSONResponse(
            {
                "status": "ok",
                "entities": len(config.kg.entities),
                "packages": len(config.kg.packages),
            }
        )

    async def reload(request: Request) -> Response:
        try:
            config = state.reload()
        except SnapshotError as exc:
            return _error(400, str(exc))
        return JSONResponse({"status": "reloaded", "entities": len(config.kg.entities)})

    return Starlette(
        routes=[
            Route("/v1/link", link, methods=["POST"]),
            Route("/v1/packages", packages, methods=["GET"]),
            Route("/v1/health", health, methods=["GET"]),
            Route("/v1/reload", reload, methods=["POST"]),
        ]
    )


def serve(
    kg_path: str | Path,
    lexicon_path: str | Path,
    host: str = "127.0.0.1",
    port: int = DEFAULT_PORT,
    log_path: str | Path | None = None,
    tau: float = DEFAULT_TAU,
    k: int = DEFAULT_K,
) -> None:
    """Load the graph, then block serving HTTP; SIGHUP triggers a reload."""
    import signal

    import uvicorn

    sink = JsonlSink(log_path) if log_path is not None else None
    state = ServiceState(kg_path, lexicon_path, sink=sink, tau=tau, k=k)
    state.reload()  # fail fast before binding the port

    def on_sighup(signum, frame):  # pragma: no cover - signal delivery
        try:
            state.reload()
        except SnapshotError:
            pass  # keep serving the previous snapshot

    signal.signal(signal.SIGHUP, on_sighup)
    uvicorn.run(build_app(state), host=host, port=port, log_level="warning")
