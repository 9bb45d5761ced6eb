"""FastAPI app speaking the tool wire protocol.

Route contract (client side lives in starqa.protocol):
  GET  /cards   -> JSON array of the served card subset
  POST /invoke  -> 200 ToolResult JSON
                   400 malformed request body
                   422 {"error": <exception class>, "message": <text>} for
                       tool-level failures the client re-raises by name
                   500 anything else
"""

from __future__ import annotations

from typing import Iterable, Protocol

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from starqa.cards import ToolCard, card_to_json
from starqa.errors import ToolNotFound
from starqa.protocol import EXPECTED_PAYLOAD_KEY, WIRE_ERRORS
from starqa.simtools import ToolResult

_WIRE_ERROR_TYPES = tuple(WIRE_ERRORS.values())


class Toolbox(Protocol):
    def invoke(self, tool: str, args: dict, frames: list[int]) -> ToolResult: ...


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"message": message}, status_code=400)


def _wire_failure(exc: Exception) -> JSONResponse:
    return JSONResponse(
        {"error": type(exc).__name__, "message": str(exc)}, status_code=422
    )


def create_app(cards: Iterable[ToolCard], toolbox: Toolbox) -> FastAPI:
    """Serve `cards` (the configured subset) backed by `toolbox.invoke`.

    The toolbox must be safe to call from several threads at once; /invoke
    handlers run concurrently in the worker pool.
    """
    served = list(cards)
    by_name = {c.name: c for c in served}
    card_payload = [card_to_json(c) for c in served]
    app = FastAPI(title="toolserver", docs_url=None, redoc_url=None)

    @app.get("/cards")
    def cards_route() -> JSONResponse:
        return JSONResponse(card_payload)

    @app.post("/invoke")
    async def invoke_route(request: Request) -> JSONResponse:
        # Body parsing is manual: schema problems must surface as 400, not
        # as a framework-shaped 422 the protocol client cannot interpret.
        try:
            body = await request.json()
        except Exception:
            return _bad_request("request body is not valid JSON")
        if not isinstance(body, dict):
            return _bad_request("request body must be a JSON object")
        tool = body.get("tool")
        args = body.get("args")
        frames = body.get("frames")
        if not isinstance(tool, str) or not tool:
            return _bad_request("'tool' must be a non-empty string")
        if not isinstance(args, dict):
            return _bad_request("'args' must be a JSON object")
        if not isinstance(frames, list) or not all(
            isinstance(f, int) and not isinstance(f, bool) for f in frames
        ):
            return _bad_request("'frames' must be a list of integers")
        if "context_digest" in body and not isinstance(body["context_digest"], str):
            return _bad_request("'context_digest' must be a string")
        card = by_name.get(tool)
        if card is None:
            return _wire_failure(ToolNotFound(f"{tool!r} is not served here"))
        try:
            result = await run_in_threadpool(toolbox.invoke, tool, dict(args), list(frames))
        except _WIRE_ERROR_TYPES as exc:
            return _wire_failure(exc)
        # Self-check before replying: a response that breaks the card's output
        # schema must become a 500, never a confusing 200.
        if result.tool_name != tool:
            raise RuntimeError(
                f"backend for {tool!r} answered as {result.tool_name!r}"
            )
        key = EXPECTED_PAYLOAD_KEY[card.output_schema]
        if key not in result.payload:
            raise RuntimeError(
                f"backend for {tool!r} omitted payload key {key!r} required by "
                f"output schema {card.output_schema!r}"
            )
        return JSONResponse(result.to_json())

    return app
