"""Episode loop: strategy constraints, slot alternation, and trace capture."""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

from .cards import ToolCard, ToolRegistry
from .errors import (
    AnswerParseError,
    BackendError,
    ConfigurationError,
    EpisodeAborted,
    EventNotFound,
    FrameNotVisible,
    IndexOutOfRange,
    InvalidRegion,
    ProtocolViolation,
    ToolNotFound,
    ToolServerError,
    ToolTimeout,
    WouldEmptyDictionary,
)
from .framedict import Annotation, VisibleFrameDictionary, init_uniform_sample
from .metrics import ToolchainTrace, TraceStep, digest
from .model import FULL_FRAME, QAInstance, SyntheticVideo
from .planner import (
    INVOKE_TOOL,
    SUFFICIENT,
    HeuristicPlanner,
    PlannerDecision,
    parse_answer,
    question_label,
)


class Strategy(str, Enum):
    NO_CONSTRAINTS = "no_constraints"
    PROMPTING = "prompting"
    ICL = "icl"
    DISENTANGLED = "disentangled"
    STAR = "star"


FREE_STRATEGIES = frozenset({Strategy.NO_CONSTRAINTS, Strategy.PROMPTING, Strategy.ICL})

SUFFICIENCY_MODES = ("every_step", "fixed_iterations")

# Errors a tool may raise mid-episode; each consumes an iteration, the episode
# continues, and the planner sees the failure as an observation.
TOOL_ERRORS = (
    EventNotFound,
    FrameNotVisible,
    IndexOutOfRange,
    InvalidRegion,
    ProtocolViolation,
    ToolNotFound,
    ToolServerError,
    ToolTimeout,
    WouldEmptyDictionary,
)

# Keys the scheduler injects into every tool call; planners may not set them.
RESERVED_ARG_KEYS = frozenset({"video_id", "episode_id", "call_ordinal", "qa_id", "crops"})


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy = Strategy.STAR
    max_iterations: int = 12
    sufficiency_check: str = "every_step"
    shortcut_min_steps: int = 4
    disentangled_temporal_steps: int = 2
    render_budget_chars: int = 8000

    def __post_init__(self):
        if not isinstance(self.strategy, Strategy):
            object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.max_iterations < 1:
            raise ConfigurationError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.sufficiency_check not in SUFFICIENCY_MODES:
            raise ConfigurationError(
                f"sufficiency_check must be one of {SUFFICIENCY_MODES}, got {self.sufficiency_check!r}"
            )
        if self.shortcut_min_steps < 0:
            raise ConfigurationError("shortcut_min_steps must be >= 0")
        if self.disentangled_temporal_steps < 1:
            raise ConfigurationError("disentangled_temporal_steps must be >= 1")


@dataclass
class EpisodeState:
    dictionary: VisibleFrameDictionary
    invocations: int = 0  # tool calls made so far, errored ones included
    next_slot: str | None = None  # alternation slot the next call must fill
    first_category: str | None = None
    temporal_steps: int = 0  # disentangled phase progress
    terminal: bool = False
    finished: bool = False


def allowed_toolset(state: EpisodeState, config: StrategyConfig, registry: ToolRegistry) -> list[ToolCard]:
    """Cards the planner may pick from at the current point of the episode."""
    sets = registry.toolsets()
    if state.terminal:
        return list(sets.general)
    if config.strategy in FREE_STRATEGIES:
        return registry.cards()
    if config.strategy is Strategy.DISENTANGLED:
        if state.temporal_steps < config.disentangled_temporal_steps:
            return list(sets.temporal)
        return list(sets.spatial)
    if state.next_slot == "temporal":
        return list(sets.temporal)
    if state.next_slot == "spatial":
        return list(sets.spatial)
    # Opening move: either slot, but never a General tool.
    return [c for c in registry.cards() if c.category.value != "general"]


def _effective_category(card: ToolCard, config: StrategyConfig, state: EpisodeState) -> str:
    if state.terminal or card.category.value == "general":
        return "general"
    if config.strategy is Strategy.DISENTANGLED:
        if state.temporal_steps < config.disentangled_temporal_steps:
            return "temporal"
        return "spatial"
    if config.strategy is Strategy.STAR:
        if state.next_slot is not None:
            return state.next_slot
        if card.category.value in ("temporal", "spatial"):
            return card.category.value
        return "temporal"  # a Both tool opening the chain counts as temporal
    return card.category.value


def _advance(state: EpisodeState, config: StrategyConfig, effective: str) -> None:
    state.invocations += 1
    if effective == "general":
        return
    if state.first_category is None and effective in ("temporal", "spatial"):
        state.first_category = effective
    if config.strategy is Strategy.STAR:
        state.next_slot = "spatial" if effective == "temporal" else "temporal"
    elif config.strategy is Strategy.DISENTANGLED:
        if state.temporal_steps < config.disentangled_temporal_steps:
            state.temporal_steps += 1


def _sufficiency_ready(state: EpisodeState, config: StrategyConfig) -> bool:
    if config.sufficiency_check != "every_step":
        return False
    if state.invocations < 1:
        return False
    if config.strategy is Strategy.STAR:
        # Structural guarantee: the alternating chain runs its minimum length.
        return state.invocations >= config.shortcut_min_steps
    if config.strategy is Strategy.DISENTANGLED:
        # The phased plan finishes its temporal half and sees one spatial step.
        return state.invocations > config.disentangled_temporal_steps
    return True


def annotation_entries(dictionary: VisibleFrameDictionary) -> list[dict]:
    """Dictionary log in the wire shape tools consume."""
    return [
        {
            "frame": f,
            "kind": a.kind,
            "payload": a.payload,
            "source_tool": a.source_tool,
            "step": a.step,
        }
        for f, a in dictionary.annotation_log()
    ]


def build_args(
    card: ToolCard,
    planner_args: dict,
    dictionary: VisibleFrameDictionary,
    video: SyntheticVideo,
    qa: QAInstance,
    episode_id: str,
    call_ordinal: int,
) -> dict:
    """Planner args completed with defaults, dictionary context, and reserved keys."""
    args = dict(planner_args)
    visible = dictionary.visible_frames()
    defaults = {
        "frames": list(visible),
        "span": [visible[0], visible[-1]],
        "frame": visible[0],
        "bbox": FULL_FRAME.as_list(),
        "question": qa.question,
        "query": qa.question,
        "action": qa.question,
        "task": qa.question,
        "label": question_label(qa.question),
        "options": list(qa.options),
    }
    for param in card.input_schema:
        if param.name in args or param.name == "annotations":
            continue
        if param.required and param.name in defaults:
            args[param.name] = defaults[param.name]
    if any(p.name == "annotations" for p in card.input_schema):
        args["annotations"] = annotation_entries(dictionary)
    crops = {}
    for f in visible:
        crop = dictionary.latest_crop(f)
        if crop is not None:
            crops[str(f)] = list(crop)
    if crops:
        args["crops"] = crops
    args["video_id"] = video.video_id
    args["episode_id"] = episode_id
    args["call_ordinal"] = call_ordinal
    args["qa_id"] = qa.qa_id
    return args


def apply_result(result, dictionary: VisibleFrameDictionary, step: int) -> None:
    if result.dictionary_effect == "temporal_update":
        selection = result.payload.get("selection")
        if not isinstance(selection, list):
            raise ProtocolViolation(f"{result.tool_name} temporal update lacks a selection")
        dictionary.apply_temporal_update(selection, step, result.tool_name)
        return
    if result.dictionary_effect != "annotation":
        return
    for entry in result.payload.get("annotations", []):
        try:
            frame, kind, payload = entry["frame"], entry["kind"], entry["payload"]
        except (TypeError, KeyError):
            raise ProtocolViolation(f"bad annotation entry from {result.tool_name}") from None
        extra = entry.get("extra")
        dictionary.annotate(
            frame,
            Annotation(
                kind=kind,
                payload=str(payload),
                source_tool=result.tool_name,
                step=step,
                extra=tuple(extra) if extra is not None else None,
            ),
        )


def detect_shortcut(trace: ToolchainTrace, config: StrategyConfig) -> bool:
    """A General call before both slots were exercised, or a too-short chain."""
    return _shortcut_from_steps(trace.steps, config.shortcut_min_steps)


def _shortcut_from_steps(steps, min_steps: int) -> bool:
    temporal_seen = spatial_seen = False
    non_general = 0
    for s in steps:
        if s.effective_category == "violation":
            continue
        if s.effective_category == "general":
            if not (temporal_seen and spatial_seen):
                return True
            continue
        non_general += 1
        if s.effective_category in ("temporal", "both"):
            temporal_seen = True
        if s.effective_category in ("spatial", "both"):
            spatial_seen = True
    return non_general < min_steps


_PLANNER_LABELS = {
    "ScriptedPlanner": "scripted",
    "HeuristicPlanner": "heuristic",
    "RemoteChatPlanner": "remote",
}


def run_episode(
    video: SyntheticVideo,
    qa: QAInstance,
    registry: ToolRegistry,
    planner,
    toolbox,
    config: StrategyConfig | None = None,
    episode_id: str | None = None,
    on_backend_error: str = "fallback",
    planner_label: str | None = None,
) -> tuple[int, ToolchainTrace]:
    """One full question episode; returns the answer index and its trace.

    on_backend_error: "fallback" swaps in a HeuristicPlanner so runs never
    wedge; "abort" raises EpisodeAborted (partial trace on the exception).
    """
    if on_backend_error not in ("fallback", "abort"):
        raise ConfigurationError(f"bad on_backend_error {on_backend_error!r}")
    config = config or StrategyConfig()
    episode_id = episode_id or f"{config.strategy.value}:{qa.qa_id}"
    label = planner_label or _PLANNER_LABELS.get(type(planner).__name__, type(planner).__name__)
    noise_seed = getattr(getattr(toolbox, "noise", None), "seed", 0)

    dictionary = init_uniform_sample(video, step=0)
    state = EpisodeState(dictionary=dictionary)
    initial_frames = tuple(dictionary.visible_frames())
    steps: list[TraceStep] = []
    observations: list[str] = []
    violations = 0
    fell_back = False

    active = planner
    active.begin_episode(episode_id)

    def context() -> str:
        text = dictionary.render_context(config.render_budget_chars)
        if observations:
            text += "\n" + "\n".join(observations[-3:])
        return text

    def build_trace(final_answer: int, answer_text: str, correct: bool, aborted: bool = False) -> ToolchainTrace:
        step_tuple = tuple(steps)
        return ToolchainTrace(
            episode_id=episode_id,
            video_id=video.video_id,
            qa_id=qa.qa_id,
            question_kind=qa.question_kind,
            strategy=config.strategy.value,
            planner=label,
            noise_seed=noise_seed,
            initial_frames=initial_frames,
            steps=step_tuple,
            final_answer=final_answer,
            correct=correct,
            shortcut=_shortcut_from_steps(step_tuple, config.shortcut_min_steps),
            protocol_violations=violations,
            planner_fallback=fell_back,
            answer_text=answer_text,
            aborted=aborted,
        )

    def abort(exc: BackendError):
        err = EpisodeAborted(f"planner backend failed: {exc}")
        err.partial_trace = build_trace(-1, "", False, aborted=True)
        raise err from None

    def switch_to_fallback(exc=None):
        nonlocal active, fell_back
        if fell_back:
            abort(exc or BackendError("fallback planner failed"))
        fell_back = True
        active = HeuristicPlanner()
        active.begin_episode(episode_id)

    def validate(decision: PlannerDecision, allowed: list[ToolCard], allow_sufficient: bool) -> str | None:
        if decision.kind == SUFFICIENT:
            return None if allow_sufficient else "a tool invocation is required at this step"
        if decision.kind != INVOKE_TOOL:
            return f"unknown decision kind {decision.kind!r}"
        by_name = {c.name: c for c in allowed}
        if decision.tool_name not in by_name:
            return f"tool {decision.tool_name!r} is outside the allowed set"
        schema = {p.name for p in by_name[decision.tool_name].input_schema}
        for key in decision.tool_args:
            if key in RESERVED_ARG_KEYS:
                return f"arg {key!r} is reserved for the scheduler"
            if key not in schema:
                return f"arg {key!r} is not in {decision.tool_name}'s input schema"
        return None

    def ask(allowed: list[ToolCard], allow_sufficient: bool) -> tuple[PlannerDecision, str | None]:
        nonlocal violations
        try:
            decision = active.select_tool(qa.question, qa.options, context(), list(allowed))
        except BackendError as exc:
            if on_backend_error == "abort":
                abort(exc)
            switch_to_fallback(exc)
            decision = active.select_tool(qa.question, qa.options, context(), list(allowed))
        problem = validate(decision, allowed, allow_sufficient)
        if problem is None:
            return decision, None
        try:
            decision = active.select_tool(
                qa.question, qa.options, context(), list(allowed), corrective=True
            )
        except BackendError as exc:
            if on_backend_error == "abort":
                abort(exc)
            switch_to_fallback(exc)
            decision = active.select_tool(qa.question, qa.options, context(), list(allowed))
        problem = validate(decision, allowed, allow_sufficient)
        return decision, problem

    def record_violation(decision: PlannerDecision, allowed: list[ToolCard], problem: str) -> None:
        nonlocal violations
        violations += 1
        observations.append(f"planner violation: {problem}")
        steps.append(
            TraceStep(
                step=len(steps),
                allowed_categories=tuple(sorted({c.category.value for c in allowed})),
                tool_name=decision.tool_name or "(none)",
                effective_category="violation",
                planner_args=dict(decision.tool_args),
                args_digest="",
                result_digest="",
                frames_touched=(),
                wall_time_ms=0.0,
                error=f"ProtocolViolation: {problem}",
            )
        )

    def execute(decision: PlannerDecision, allowed: list[ToolCard]) -> None:
        nonlocal violations
        card = registry.get(decision.tool_name)
        effective = _effective_category(card, config, state)
        ordinal = len(steps)
        args = build_args(card, decision.tool_args, dictionary, video, qa, episode_id, ordinal)
        error = None
        result = None
        start = time.perf_counter()
        try:
            result = toolbox.invoke(card.name, args, dictionary.visible_frames())
            apply_result(result, dictionary, step=ordinal + 1)
        except TOOL_ERRORS as exc:
            error = f"{type(exc).__name__}: {exc}"
            observations.append(f"error from {card.name}: {exc}")
            if isinstance(exc, ProtocolViolation):
                violations += 1
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        steps.append(
            TraceStep(
                step=ordinal,
                allowed_categories=tuple(sorted({c.category.value for c in allowed})),
                tool_name=card.name,
                effective_category=effective,
                planner_args=dict(decision.tool_args),
                args_digest=digest(args),
                result_digest=digest(result.to_json()) if result else "",
                frames_touched=result.frames_touched if result else (),
                wall_time_ms=elapsed_ms,
                error=error,
            )
        )
        _advance(state, config, effective)

    def judge() -> bool:
        try:
            return bool(active.judge_sufficiency(qa.question, qa.options, context()))
        except BackendError as exc:
            if on_backend_error == "abort":
                abort(exc)
            switch_to_fallback(exc)
            return bool(active.judge_sufficiency(qa.question, qa.options, context()))

    # The opening call plus max_iterations loop rounds.
    cap = config.max_iterations + 1
    while state.invocations < cap:
        ready = _sufficiency_ready(state, config)
        if ready and judge():
            break
        decision, problem = ask(allowed_toolset(state, config, registry), ready)
        if problem is not None:
            record_violation(decision, allowed_toolset(state, config, registry), problem)
            switch_to_fallback()
            break
        if decision.kind == SUFFICIENT:
            break
        execute(decision, allowed_toolset(state, config, registry))

    # Terminal phase: a General tool, then the answer.
    state.terminal = True
    allowed = allowed_toolset(state, config, registry)
    decision, problem = ask(allowed, allow_sufficient=False)
    if problem is not None:
        record_violation(decision, allowed, problem)
        switch_to_fallback()
        decision, problem = ask(allowed, allow_sufficient=False)
        if problem is not None:
            abort(BackendError(f"fallback violated the terminal step: {problem}"))
    execute(decision, allowed)
    state.finished = True

    try:
        raw = active.generate_answer(qa.question, qa.options, context())
    except BackendError as exc:
        if on_backend_error == "abort":
            abort(exc)
        switch_to_fallback(exc)
        raw = active.generate_answer(qa.question, qa.options, context())
    try:
        final = parse_answer(raw, list(qa.options))
    except AnswerParseError:
        final = -1
    trace = build_trace(final, raw, correct=final == qa.correct_index)
    return final, trace
