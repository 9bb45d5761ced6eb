"""HTTP client side of the remote tool protocol (GET /cards, POST /invoke)."""

from __future__ import annotations

import httpx

from .cards import ToolCard, ToolRegistry, card_canonical_bytes, card_from_json
from .errors import (
    AnswerParseError,
    EmptyVideo,
    EventNotFound,
    FrameNotVisible,
    HandshakeError,
    IndexOutOfRange,
    InvalidCard,
    InvalidRegion,
    ProtocolViolation,
    ToolNotFound,
    ToolServerError,
    ToolTimeout,
    WouldEmptyDictionary,
)
from .metrics import digest
from .simtools import ToolResult

DEFAULT_TIMEOUT_S = 30.0

# Payload key each output schema promises; a response without it is rejected
# before the scheduler ever sees the result.
EXPECTED_PAYLOAD_KEY = {
    "frame_selection": "selection",
    "span": "span",
    "events_text": "text",
    "detections": "detections",
    "marks": "marks",
    "captions": "annotations",
    "answer_text": "text",
    "text_blocks": "blocks",
    "crop_ref": "crop",
    "segments": "segments",
    "stub_text": "text",
    "track_summary": "instances",
}

# Tool-level failures travel as HTTP 422 {"error": name, "message": text} and
# re-raise client-side, so a remote backend fails exactly like the in-process
# one and replayed traces keep their error steps.
WIRE_ERRORS = {
    cls.__name__: cls
    for cls in (
        AnswerParseError,
        EmptyVideo,
        EventNotFound,
        FrameNotVisible,
        IndexOutOfRange,
        InvalidRegion,
        ProtocolViolation,
        ToolNotFound,
        WouldEmptyDictionary,
    )
}


def context_digest(args: dict, frames: list[int]) -> str:
    """Fingerprint of the dictionary state a call was issued against."""
    return digest({"frames": list(frames), "annotations": args.get("annotations") or []})


def handshake(
    endpoint: str,
    registry: ToolRegistry,
    client: httpx.Client | None = None,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> list[ToolCard]:
    """Fetch the server's cards and require byte equality with the local ones."""
    url = endpoint.rstrip("/") + "/cards"
    try:
        response = (client or httpx).get(url, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise ToolTimeout(f"handshake with {url} timed out") from exc
    except httpx.TransportError as exc:
        raise ToolServerError(f"handshake with {url} failed: {exc}") from exc
    if response.status_code >= 500:
        raise ToolServerError(f"handshake: server returned {response.status_code}")
    if response.status_code != 200:
        raise HandshakeError(f"handshake: unexpected status {response.status_code}")
    try:
        body = response.json()
    except ValueError as exc:
        raise HandshakeError(f"handshake: response is not JSON: {exc}") from exc
    if not isinstance(body, list):
        raise HandshakeError("handshake: /cards must return a JSON array")
    cards = []
    for entry in body:
        try:
            card = card_from_json(entry)
        except InvalidCard as exc:
            raise HandshakeError(f"handshake: served card invalid: {exc}") from exc
        try:
            local = registry.get(card.name)
        except ToolNotFound:
            raise HandshakeError(f"server offers unknown card {card.name!r}") from None
        if card_canonical_bytes(card) != card_canonical_bytes(local):
            raise HandshakeError(f"card {card.name!r} differs from the local definition")
        cards.append(card)
    return cards


def remote_invoke(
    endpoint: str,
    card: ToolCard,
    args: dict,
    frames: list[int],
    snapshot_digest: str,
    client: httpx.Client | None = None,
    timeout: float = DEFAULT_TIMEOUT_S,
) -> ToolResult:
    """POST one tool call; validate the response against the local card."""
    url = endpoint.rstrip("/") + "/invoke"
    body = {
        "tool": card.name,
        "args": args,
        "frames": list(frames),
        "context_digest": snapshot_digest,
    }
    try:
        response = (client or httpx).post(url, json=body, timeout=timeout)
    except httpx.TimeoutException as exc:
        raise ToolTimeout(f"{card.name}: call to {url} timed out") from exc
    except httpx.TransportError as exc:
        raise ToolServerError(f"{card.name}: call to {url} failed: {exc}") from exc
    if response.status_code >= 500:
        raise ToolServerError(f"{card.name}: server returned {response.status_code}")
    if response.status_code == 422:
        raise _wire_error(card.name, response)
    if response.status_code != 200:
        raise ProtocolViolation(
            f"{card.name}: server rejected the request with {response.status_code}"
        )
    try:
        data = response.json()
    except ValueError as exc:
        raise ProtocolViolation(f"{card.name}: response is not JSON: {exc}") from exc
    result = ToolResult.from_json(data)
    if result.tool_name != card.name:
        raise ProtocolViolation(
            f"asked for {card.name!r}, server answered as {result.tool_name!r}"
        )
    key = EXPECTED_PAYLOAD_KEY[card.output_schema]
    if key not in result.payload:
        raise ProtocolViolation(
            f"{card.name}: payload lacks {key!r} required by output schema "
            f"{card.output_schema!r}"
        )
    return result


def _wire_error(tool: str, response: httpx.Response) -> Exception:
    try:
        data = response.json()
    except ValueError:
        return ToolServerError(f"{tool}: unreadable error response")
    name = data.get("error")
    message = data.get("message", "")
    cls = WIRE_ERRORS.get(name)
    if cls is None:
        return ToolServerError(f"{tool}: server error {name!r}: {message}")
    return cls(message)


class RemoteToolbox:
    """Drop-in for SimToolbox.invoke, backed by a tool server endpoint.

    The handshake runs once at construction; invoke only accepts tools the
    server advertised there.
    """

    def __init__(
        self,
        endpoint: str,
        registry: ToolRegistry,
        client: httpx.Client | None = None,
        timeout: float = DEFAULT_TIMEOUT_S,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.registry = registry
        self.client = client
        self.timeout = timeout
        self._cards = {c.name: c for c in handshake(endpoint, registry, client, timeout)}

    def supported(self) -> list[str]:
        return sorted(self._cards)

    def invoke(self, tool: str, args: dict, frames: list[int]) -> ToolResult:
        card = self._cards.get(tool)
        if card is None:
            raise ToolNotFound(f"{tool!r} not advertised by {self.endpoint}")
        return remote_invoke(
            self.endpoint,
            card,
            args,
            frames,
            context_digest(args, frames),
            client=self.client,
            timeout=self.timeout,
        )
