"""Tool cards and the immutable registry the scheduler draws from."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import DuplicateTool, InvalidCard, InvalidCardFile, ToolNotFound


class ToolCategory(str, Enum):
    TEMPORAL = "temporal"
    SPATIAL = "spatial"
    BOTH = "both"
    GENERAL = "general"


COST_HINTS = ("cheap", "model_backed", "llm_backed")
FRAMES_SCOPES = ("single_frame", "frame_set", "segment", "whole_video", "none")

# Semantic types used by card schemas; kept flat on purpose.
SEMANTIC_TYPES = frozenset(
    """text frame_index frame_indices span box variant options annotations
    frame_selection captions detections text_blocks answer_text events_text
    crop_ref marks track_summary stub_text segments""".split()
)

_NAME = re.compile(r"^[a-z][a-z0-9_]*$")


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str
    required: bool = True


@dataclass(frozen=True)
class ToolCard:
    name: str
    category: ToolCategory
    description: str
    input_schema: tuple[ToolParam, ...]
    output_schema: str
    cost_hint: str
    frames_scope: str


def validate_card(card: ToolCard) -> None:
    if not _NAME.match(card.name or ""):
        raise InvalidCard(f"bad tool name {card.name!r}")
    if not isinstance(card.category, ToolCategory):
        raise InvalidCard(f"{card.name}: bad category {card.category!r}")
    if not card.description.strip():
        raise InvalidCard(f"{card.name}: empty description")
    if not card.input_schema:
        raise InvalidCard(f"{card.name}: empty input schema")
    seen = set()
    for param in card.input_schema:
        if not _NAME.match(param.name or ""):
            raise InvalidCard(f"{card.name}: bad parameter name {param.name!r}")
        if param.name in seen:
            raise InvalidCard(f"{card.name}: duplicate parameter {param.name!r}")
        seen.add(param.name)
        if param.type not in SEMANTIC_TYPES:
            raise InvalidCard(f"{card.name}: unknown parameter type {param.type!r}")
    if card.output_schema not in SEMANTIC_TYPES:
        raise InvalidCard(f"{card.name}: unknown output schema {card.output_schema!r}")
    if card.cost_hint not in COST_HINTS:
        raise InvalidCard(f"{card.name}: unknown cost hint {card.cost_hint!r}")
    if card.frames_scope not in FRAMES_SCOPES:
        raise InvalidCard(f"{card.name}: unknown frames scope {card.frames_scope!r}")


def card_to_json(card: ToolCard) -> dict:
    return {
        "name": card.name,
        "category": card.category.value,
        "description": card.description,
        "input_schema": [
            {"name": p.name, "type": p.type, "required": p.required} for p in card.input_schema
        ],
        "output_schema": card.output_schema,
        "cost_hint": card.cost_hint,
        "frames_scope": card.frames_scope,
    }


def card_from_json(data: dict) -> ToolCard:
    for field in ("name", "category", "description", "input_schema", "output_schema", "cost_hint", "frames_scope"):
        if field not in data:
            raise InvalidCard(f"card {data.get('name', '?')!r}: missing field {field!r}")
    try:
        category = ToolCategory(data["category"])
    except ValueError:
        raise InvalidCard(f"{data['name']}: bad category {data['category']!r}") from None
    params = tuple(
        ToolParam(p.get("name", ""), p.get("type", ""), p.get("required", True))
        for p in data["input_schema"]
    )
    card = ToolCard(
        name=data["name"],
        category=category,
        description=data["description"],
        input_schema=params,
        output_schema=data["output_schema"],
        cost_hint=data["cost_hint"],
        frames_scope=data["frames_scope"],
    )
    validate_card(card)
    return card


def card_canonical_bytes(card: ToolCard) -> bytes:
    """Canonical encoding compared byte-for-byte during server handshakes."""
    return json.dumps(card_to_json(card), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class Toolsets:
    """Scheduling sets; Both-category cards belong to the temporal and spatial sets."""

    temporal: tuple[ToolCard, ...]
    spatial: tuple[ToolCard, ...]
    general: tuple[ToolCard, ...]


class ToolRegistry:
    """Card store; frozen before episode execution so toolsets cannot drift mid-run."""

    def __init__(self):
        self._cards: dict[str, ToolCard] = {}
        self._frozen = False

    def register(self, card: ToolCard) -> None:
        if self._frozen:
            raise InvalidCard("registry is frozen; register cards before running episodes")
        validate_card(card)
        if card.name in self._cards:
            raise DuplicateTool(card.name)
        self._cards[card.name] = card

    def freeze(self) -> "ToolRegistry":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def get(self, name: str) -> ToolCard:
        try:
            return self._cards[name]
        except KeyError:
            raise ToolNotFound(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._cards

    def __len__(self) -> int:
        return len(self._cards)

    def names(self) -> list[str]:
        return list(self._cards)

    def cards(self) -> list[ToolCard]:
        return list(self._cards.values())

    def by_category(self, category: ToolCategory) -> list[ToolCard]:
        return [c for c in self._cards.values() if c.category is category]

    def toolsets(self) -> Toolsets:
        return Toolsets(
            temporal=tuple(
                c
                for c in self._cards.values()
                if c.category in (ToolCategory.TEMPORAL, ToolCategory.BOTH)
            ),
            spatial=tuple(
                c
                for c in self._cards.values()
                if c.category in (ToolCategory.SPATIAL, ToolCategory.BOTH)
            ),
            general=tuple(self.by_category(ToolCategory.GENERAL)),
        )

    def subset(self, names: list[str]) -> "ToolRegistry":
        """New unfrozen registry with only the named cards."""
        reg = ToolRegistry()
        for name in names:
            reg.register(self.get(name))
        return reg

    def without(self, names: list[str]) -> "ToolRegistry":
        reg = ToolRegistry()
        for card in self._cards.values():
            if card.name not in names:
                reg.register(card)
        return reg


def serialize_cards(registry: ToolRegistry) -> str:
    return json.dumps([card_to_json(c) for c in registry.cards()], indent=2) + "\n"


def load_cards(path: str | Path | None = None) -> ToolRegistry:
    """Registry from a card file; defaults to the bundled card set."""
    if path is None:
        raw = resources.files("starqa").joinpath("cards/default.json").read_text()
        source = "bundled default.json"
    else:
        raw = Path(path).read_text()
        source = str(path)
    try:
        entries = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise InvalidCardFile(f"{source}: not valid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise InvalidCardFile(f"{source}: expected a top-level array of cards")
    registry = ToolRegistry()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise InvalidCardFile(f"{source}: entry {i}: expected an object")
        try:
            registry.register(card_from_json(entry))
        except InvalidCard as exc:
            raise InvalidCardFile(f"{source}: entry {i}: {exc}") from None
    return registry
