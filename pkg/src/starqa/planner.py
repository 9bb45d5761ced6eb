"""Planner backends: scripted replay, keyword heuristic, and remote chat."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, runtime_checkable

import httpx

from .cards import ToolCard, card_to_json
from .errors import AnswerParseError, BackendError, ConfigurationError
from .seeding import derive_rng
from .textmatch import content_tokens

INVOKE_TOOL = "invoke_tool"
SUFFICIENT = "sufficient"

OPTION_LETTERS = "ABCDEFGH"


@dataclass(frozen=True)
class PlannerDecision:
    kind: str  # invoke_tool | sufficient
    tool_name: str | None = None
    tool_args: dict = field(default_factory=dict)
    rationale: str = ""


def parse_answer(text: str, options: list[str] | tuple[str, ...]) -> int:
    """Map backend answer text to an option index.

    Bare option letters win; otherwise the longest option literal found in the
    text wins. Nothing matching raises AnswerParseError.
    """
    if not isinstance(text, str):
        raise AnswerParseError(f"expected text, got {type(text).__name__}")
    stripped = text.strip()
    m = re.fullmatch(r"\(?([A-Ha-h])[).:]?", stripped) or re.match(
        r"(?:answer|option)\s*[:\-]?\s*\(?([A-Ha-h])\)?\s*$", stripped, re.IGNORECASE
    )
    if m:
        idx = OPTION_LETTERS.index(m.group(1).upper())
        if idx < len(options):
            return idx
    lowered = text.lower()
    ranked = sorted(range(len(options)), key=lambda i: (-len(options[i]), i))
    for i in ranked:
        if options[i].lower() in lowered:
            return i
    raise AnswerParseError(f"no option matches {text!r}")


@runtime_checkable
class PlannerBackend(Protocol):
    def begin_episode(self, episode_id: str) -> None: ...

    def select_tool(
        self,
        question: str,
        options: tuple[str, ...],
        context: str,
        allowed: list[ToolCard],
        corrective: bool = False,
    ) -> PlannerDecision: ...

    def judge_sufficiency(self, question: str, options: tuple[str, ...], context: str) -> bool: ...

    def generate_answer(self, question: str, options: tuple[str, ...], context: str) -> str: ...


# --- scripted ----------------------------------------------------------------


class ScriptedPlanner:
    """Replays a fixed decision queue; used for fixtures and trace replay."""

    def __init__(
        self,
        decisions: list[PlannerDecision],
        answer: str,
        sufficiency: list[bool] | None = None,
    ):
        self._script = list(decisions)
        self._answer = answer
        self._sufficiency = list(sufficiency) if sufficiency is not None else None
        self._queue: list[PlannerDecision] = []
        self._suff_queue: list[bool] = []
        self._last: PlannerDecision | None = None

    def begin_episode(self, episode_id: str) -> None:
        self._queue = list(self._script)
        self._suff_queue = list(self._sufficiency) if self._sufficiency is not None else []
        self._last = None

    def select_tool(self, question, options, context, allowed, corrective=False) -> PlannerDecision:
        if corrective and self._last is not None:
            return self._last  # a script cannot change its mind
        if not self._queue:
            raise BackendError("script exhausted")
        self._last = self._queue.pop(0)
        return self._last

    def judge_sufficiency(self, question, options, context) -> bool:
        if self._suff_queue:
            return self._suff_queue.pop(0)
        # Default schedule: sufficient once only the terminal decision remains.
        return len(self._queue) <= 1

    def generate_answer(self, question, options, context) -> str:
        return self._answer

    @classmethod
    def from_trace(cls, trace, qa) -> "ScriptedPlanner":
        """Rebuild the planner whose decisions reproduce the given trace."""
        decisions = [
            PlannerDecision(kind=INVOKE_TOOL, tool_name=s.tool_name, tool_args=dict(s.planner_args))
            for s in trace.steps
        ]
        answer = qa.options[trace.final_answer] if 0 <= trace.final_answer < len(qa.options) else ""
        return cls(decisions, answer)


def load_script(path) -> dict:
    """Read a script file (see docs/planner-protocol.md) into ScriptedPlanner kwargs."""
    try:
        data = json.loads(open(path).read())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read script {path}: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("decisions"), list):
        raise ConfigurationError(f"script {path} needs a 'decisions' list")
    decisions = []
    for i, entry in enumerate(data["decisions"]):
        if not isinstance(entry, dict) or not isinstance(entry.get("tool_name"), str):
            raise ConfigurationError(f"script {path}: decision {i} needs a tool_name")
        decisions.append(
            PlannerDecision(
                kind=INVOKE_TOOL,
                tool_name=entry["tool_name"],
                tool_args=dict(entry.get("tool_args") or {}),
                rationale=str(entry.get("rationale", "")),
            )
        )
    return {
        "decisions": decisions,
        "answer": str(data.get("answer", "")),
        "sufficiency": data.get("sufficiency"),
    }


# --- heuristic ---------------------------------------------------------------

_GROUNDED = re.compile(r"grounded '([^']*)' to frames (\d+)\.\.(\d+)")
_CAPTION_EVENTS = re.compile(r"events: ([^;\n]*)")


def _evidence_query(question: str, options: tuple[str, ...], context: str) -> str:
    """Grounding query enriched with the event active where the evidence sits.

    Caption lines that mention an option or a question noun pin down which
    frames matter; quoting their active event disambiguates subject-only
    questions. Without captions this degrades to the bare question.
    """
    cue = content_tokens(question + " " + " ".join(options))
    best_tail, best_score = None, 0
    for line in context.splitlines():
        if "caption=" not in line:
            continue
        m = _CAPTION_EVENTS.search(line)
        if not m or m.group(1).strip() in ("", "-"):
            continue
        score = len(content_tokens(line) & cue)
        if score > best_score:
            best_tail, best_score = m.group(1).strip(), score
    if best_tail is None:
        return question
    return f"{question} {best_tail}"


def _option_in_context(option: str, context: str) -> bool:
    """Digit options need count phrasing; everything else is a word-bounded literal."""
    if option.isdigit():
        return (
            re.search(rf"\b{option} distinct\b", context) is not None
            or re.search(rf"answer: {option}\b", context) is not None
        )
    return re.search(rf"\b{re.escape(option.lower())}\b", context.lower()) is not None


class HeuristicPlanner:
    """One fixed rule table over (question, context, allowed set).

    shortcut_bias models how strongly an unconstrained prompt tempts the planner
    into answering from the whole video at once; it only matters when General
    tools are in the allowed set before any evidence exists.
    """

    def __init__(self, shortcut_bias: float = 0.0, seed: int = 0):
        self.shortcut_bias = shortcut_bias
        self.seed = seed
        self._shortcut = False
        self._captioned = False
        self._selected = 0
        self._grounded = False
        self._trimmed = False
        self._tracked = False
        self._referred = False
        self._ocr_done = False
        self._asked_image = False

    def begin_episode(self, episode_id: str) -> None:
        rng = derive_rng("heuristic", self.seed, episode_id)
        self._shortcut = rng.random() < self.shortcut_bias
        self._captioned = False
        self._selected = 0
        self._grounded = False
        self._trimmed = False
        self._tracked = False
        self._referred = False
        self._ocr_done = False
        self._asked_image = False

    # -- helpers ---------------------------------------------------------------

    @staticmethod
    def _grounded_span(context: str) -> tuple[int, int] | None:
        matches = _GROUNDED.findall(context)
        if not matches:
            return None
        _, lo, hi = matches[-1]
        return int(lo), int(hi)

    @staticmethod
    def _kinds(question: str) -> dict[str, bool]:
        q = question.lower()
        return {
            "text": any(w in q for w in ("sign", " say", "written", " read")),
            "color": "color" in q,
            "count": "how many" in q,
            "order": "happens first" in q or "which happens" in q,
            "theme": "theme" in q or "overall" in q,
        }

    def _decide(
        self, question: str, options: tuple[str, ...], context: str, names: set[str]
    ) -> tuple[str, dict] | None:
        kinds = self._kinds(question)
        span = self._grounded_span(context)
        has_captions = "caption=" in context
        ground_query = _evidence_query(question, options, context)
        rules: list[tuple[bool, str, dict]] = [
            # Whole-video shortcut when nothing constrains us and no evidence yet.
            (self._shortcut and not has_captions, "video_qa", {}),
            # Evidence first: caption what is visible.
            (not self._captioned, "image_captioner", {}),
            # Counting is segment work; ground the anchor before tracking.
            (kinds["count"] and not self._grounded, "temporal_grounding", {"query": ground_query}),
            (kinds["count"] and not self._tracked, "object_tracker", {"label": question_label(question), "span": list(span) if span else None}),
            # With captions in hand, narrow to the frames that match the question.
            (has_captions and self._selected == 0, "frame_selector", {"query": question, "variant": "vanilla"}),
            # Question-kind readers.
            (kinds["text"] and not self._ocr_done, "text_detector", {}),
            (kinds["color"] and not self._asked_image, "image_qa", {"question": question}),
            (kinds["order"] and not self._referred, "temporal_referring", {}),
            # No joy yet: locate the anchor event and pull its frames in.
            (not self._grounded, "temporal_grounding", {"query": ground_query}),
            (span is not None and not self._trimmed, "video_trimmer", {"span": list(span) if span else None}),
            # Second look after the visible set changed.
            (self._trimmed and not self._ocr_done, "text_detector", {}),
            (self._trimmed and not self._asked_image, "image_qa", {"question": question}),
            (has_captions and self._selected == 1, "frame_selector", {"query": question, "variant": "akeys"}),
            (not self._referred, "temporal_referring", {}),
            (not self._asked_image, "image_qa", {"question": question}),
        ]
        for applies, tool, args in rules:
            if applies and tool in names:
                return tool, {k: v for k, v in args.items() if v is not None}
        return None

    def _note_choice(self, tool: str) -> None:
        flags = {
            "image_captioner": "_captioned",
            "temporal_grounding": "_grounded",
            "video_trimmer": "_trimmed",
            "object_tracker": "_tracked",
            "temporal_referring": "_referred",
            "text_detector": "_ocr_done",
            "image_qa": "_asked_image",
        }
        if tool == "frame_selector":
            self._selected += 1
        elif tool in flags:
            setattr(self, flags[tool], True)

    def select_tool(self, question, options, context, allowed, corrective=False) -> PlannerDecision:
        names = {c.name for c in allowed}
        general_only = all(c.category.value == "general" for c in allowed)
        if general_only:
            has_evidence = "=" in context
            for tool in (
                ("text_summarizer", "video_qa", "video_summarizer")
                if has_evidence
                else ("video_qa", "video_summarizer", "text_summarizer")
            ):
                if tool in names:
                    return PlannerDecision(INVOKE_TOOL, tool, {}, "terminal answer")
        picked = self._decide(question, options, context, names)
        if picked is None:
            # Deterministic fallback: cheapest first within the allowed set.
            order = {"cheap": 0, "model_backed": 1, "llm_backed": 2}
            card = sorted(allowed, key=lambda c: (order[c.cost_hint], c.name))[0]
            self._note_choice(card.name)
            return PlannerDecision(INVOKE_TOOL, card.name, {}, "fallback")
        tool, args = picked
        self._note_choice(tool)
        return PlannerDecision(INVOKE_TOOL, tool, args, "rule table")

    def judge_sufficiency(self, question, options, context) -> bool:
        sufficient = any(_option_in_context(opt, context) for opt in options)
        if self._kinds(question)["theme"]:
            # Theme labels rarely appear literally; broad captions stand in for them.
            return sufficient or context.count("caption=") >= 8
        return sufficient

    def generate_answer(self, question, options, context) -> str:
        final = re.findall(r"answer: ([^;\n]+)", context)
        if final:
            return final[-1].strip()
        if "happens first" in question.lower():
            # Context lines are frame-ordered, so the earliest mention wins.
            lowered = context.lower()
            hits = [
                (lowered.find(opt.lower()), i)
                for i, opt in enumerate(options)
                if lowered.find(opt.lower()) >= 0
            ]
            if hits:
                return options[min(hits)[1]]
        ranked = sorted(options, key=lambda o: (-len(o), options.index(o)))
        for opt in ranked:
            if _option_in_context(opt, context):
                return opt
        return options[0]


_LABEL = re.compile(r"instances of (\w+)")


def question_label(question: str) -> str:
    m = _LABEL.search(question)
    return m.group(1) if m else question


# --- remote chat -------------------------------------------------------------

PLANNER_URL_ENV = "STAR_PLANNER_URL"
PLANNER_TOKEN_ENV = "STAR_PLANNER_TOKEN"

_FENCED = re.compile(r"```json\s*(\{.*?\})\s*```", re.DOTALL)


def _system_prompt() -> str:
    return resources.files("starqa").joinpath("prompts/system.txt").read_text()


class RemoteChatPlanner:
    """Delegates decisions to a chat endpoint speaking the JSON block protocol."""

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url or os.environ.get(PLANNER_URL_ENV)
        if not self.url:
            raise BackendError(f"no planner endpoint; set {PLANNER_URL_ENV} or pass url=")
        self.token = token or os.environ.get(PLANNER_TOKEN_ENV)
        self.timeout = timeout
        self._client = httpx.Client(transport=transport, timeout=timeout)
        self._system = _system_prompt()

    def begin_episode(self, episode_id: str) -> None:
        self.episode_id = episode_id

    def _chat(self, messages: list[dict], cards: list[ToolCard]) -> str:
        headers = {"content-type": "application/json"}
        if self.token:
            headers["authorization"] = f"Bearer {self.token}"
        body = {
            "system": self._system,
            "messages": messages,
            "tool_cards": [card_to_json(c) for c in cards],
            "temperature": 0,
        }
        try:
            resp = self._client.post(self.url, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise BackendError(f"planner endpoint unreachable: {exc}") from None
        if resp.status_code != 200:
            raise BackendError(f"planner endpoint returned {resp.status_code}")
        try:
            content = resp.json()["content"]
        except (ValueError, KeyError):
            raise BackendError("planner response is not {'content': ...} JSON") from None
        if not isinstance(content, str):
            raise BackendError("planner content is not text")
        return content

    def _json_block(self, content: str) -> dict:
        blocks = _FENCED.findall(content)
        if len(blocks) != 1:
            raise BackendError(f"expected exactly one fenced json block, found {len(blocks)}")
        try:
            data = json.loads(blocks[0])
        except json.JSONDecodeError as exc:
            raise BackendError(f"fenced block is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise BackendError("fenced block must be a JSON object")
        return data

    def _ask(self, prompt: str, cards: list[ToolCard], retry_note: str) -> dict:
        messages = [{"role": "user", "content": prompt}]
        try:
            return self._json_block(self._chat(messages, cards))
        except BackendError as first:
            messages.append({"role": "user", "content": f"{retry_note} ({first})"})
            return self._json_block(self._chat(messages, cards))

    def select_tool(self, question, options, context, allowed, corrective=False) -> PlannerDecision:
        note = "Your previous choice was not in the allowed set. " if corrective else ""
        prompt = (
            f"{note}Question: {question}\nOptions: {list(options)}\n"
            f"Allowed tools: {[c.name for c in allowed]}\n"
            f"Context:\n{context}\n\n"
            'Reply with one fenced json block: {"kind": "invoke_tool", "tool_name": ..., '
            '"tool_args": {...}, "rationale": ...} or {"kind": "sufficient"}.'
        )
        data = self._ask(prompt, allowed, "Reply with exactly one fenced json block.")
        kind = data.get("kind")
        if kind == SUFFICIENT:
            return PlannerDecision(SUFFICIENT, rationale=str(data.get("rationale", "")))
        if kind != INVOKE_TOOL or not isinstance(data.get("tool_name"), str):
            raise BackendError(f"bad decision object: {data!r}")
        args = data.get("tool_args") or {}
        if not isinstance(args, dict):
            raise BackendError("tool_args must be an object")
        return PlannerDecision(INVOKE_TOOL, data["tool_name"], args, str(data.get("rationale", "")))

    def judge_sufficiency(self, question, options, context) -> bool:
        prompt = (
            f"Question: {question}\nOptions: {list(options)}\nContext:\n{context}\n\n"
            'Is the context sufficient to answer? Reply with one fenced json block: '
            '{"sufficient": true} or {"sufficient": false}.'
        )
        data = self._ask(prompt, [], "Reply with exactly one fenced json block.")
        return bool(data.get("sufficient"))

    def generate_answer(self, question, options, context) -> str:
        prompt = (
            f"Question: {question}\nOptions: {list(options)}\nContext:\n{context}\n\n"
            'Answer with one fenced json block: {"answer": "<option letter or text>"}.'
        )
        data = self._ask(prompt, [], "Reply with exactly one fenced json block.")
        answer = data.get("answer")
        if not isinstance(answer, str):
            raise BackendError(f"bad answer object: {data!r}")
        return answer
