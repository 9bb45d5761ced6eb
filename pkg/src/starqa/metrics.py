"""Trace records, JSONL serialization, and run reports."""

from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

from .cards import ToolRegistry
from .errors import TraceParseError


def digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class TraceStep:
    step: int
    allowed_categories: tuple[str, ...]
    tool_name: str
    effective_category: str  # temporal | spatial | both | general
    planner_args: dict
    args_digest: str
    result_digest: str
    frames_touched: tuple[int, ...]
    wall_time_ms: float
    error: str | None = None


@dataclass(frozen=True)
class ToolchainTrace:
    episode_id: str
    video_id: str
    qa_id: str
    question_kind: str
    strategy: str
    planner: str
    noise_seed: int
    initial_frames: tuple[int, ...]
    steps: tuple[TraceStep, ...]
    final_answer: int
    correct: bool
    shortcut: bool
    protocol_violations: int = 0
    planner_fallback: bool = False
    answer_text: str = ""  # raw backend answer; kept when parsing fails
    aborted: bool = False


def toolchain_length(trace: ToolchainTrace) -> int:
    """Number of tool invocations including the terminal General call."""
    return len(trace.steps)


def distinct_tools(trace: ToolchainTrace) -> int:
    return len({s.tool_name for s in trace.steps})


def frames_processed(trace: ToolchainTrace) -> int:
    """Union of touched frames and the initial sample."""
    touched: set[int] = set(trace.initial_frames)
    for step in trace.steps:
        touched.update(step.frames_touched)
    return len(touched)


def normalize_wall_time(trace: ToolchainTrace) -> ToolchainTrace:
    """Copy with wall times zeroed; comparisons are always modulo wall time."""
    return replace(
        trace, steps=tuple(replace(s, wall_time_ms=0.0) for s in trace.steps)
    )


def sample_variance(values: list[float]) -> float:
    """Sample variance with the n-1 divisor; 0.0 for fewer than two values."""
    if len(values) < 2:
        return 0.0
    return statistics.variance(values)


# Means measured at full scale with a hosted LLM planner on public video
# benchmarks. Kept for orientation only; desk-scale runs land elsewhere and
# nothing asserts against these.
FULL_SCALE_REFERENCE = {
    "mean_toolchain_length": 8.7,
    "mean_distinct_tools": 6.3,
}


@dataclass(frozen=True)
class RunReport:
    strategy: str
    planner: str
    n_episodes: int
    accuracy_pct: float
    mean_frames: float
    mean_toolchain_length: float
    mean_distinct_tools: float
    shortcut_rate_pct: float
    mean_wall_time_ms: float
    usage_pct: dict  # tool name -> percentage of all invocations, zero-usage included
    category_variance: dict  # category -> sample variance of its tools' usage_pct
    protocol_violations: int
    error_steps: int
    aborted_episodes: int

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "planner": self.planner,
            "n_episodes": self.n_episodes,
            "accuracy_pct": self.accuracy_pct,
            "mean_frames": self.mean_frames,
            "mean_toolchain_length": self.mean_toolchain_length,
            "mean_distinct_tools": self.mean_distinct_tools,
            "shortcut_rate_pct": self.shortcut_rate_pct,
            "mean_wall_time_ms": self.mean_wall_time_ms,
            "usage_pct": dict(sorted(self.usage_pct.items())),
            "category_variance": dict(sorted(self.category_variance.items())),
            "protocol_violations": self.protocol_violations,
            "error_steps": self.error_steps,
            "aborted_episodes": self.aborted_episodes,
        }


def usage_distribution(traces: list[ToolchainTrace], registry: ToolRegistry) -> dict[str, float]:
    counts = {name: 0 for name in registry.names()}
    total = 0
    for trace in traces:
        for step in trace.steps:
            total += 1
            if step.tool_name in counts:
                counts[step.tool_name] += 1
    if total == 0:
        return {name: 0.0 for name in counts}
    return {name: 100.0 * c / total for name, c in counts.items()}


def category_variances(usage_pct: dict[str, float], registry: ToolRegistry) -> dict[str, float]:
    out = {}
    for category in ("temporal", "spatial", "both", "general"):
        values = [
            usage_pct[c.name]
            for c in registry.cards()
            if c.category.value == category and c.name in usage_pct
        ]
        out[category] = sample_variance(values)
    return out


def build_report(traces: list[ToolchainTrace], registry: ToolRegistry, planner: str = "") -> RunReport:
    """Pure function of traces; rerunning on the same files gives identical bytes."""
    n = len(traces)
    usage = usage_distribution(traces, registry)
    strategies = {t.strategy for t in traces}
    strategy = strategies.pop() if len(strategies) == 1 else "mixed"
    planners = {t.planner for t in traces}
    planner = planner or (planners.pop() if len(planners) == 1 else "mixed")
    return RunReport(
        strategy=strategy,
        planner=planner,
        n_episodes=n,
        accuracy_pct=100.0 * sum(t.correct for t in traces) / n if n else 0.0,
        mean_frames=sum(frames_processed(t) for t in traces) / n if n else 0.0,
        mean_toolchain_length=sum(toolchain_length(t) for t in traces) / n if n else 0.0,
        mean_distinct_tools=sum(distinct_tools(t) for t in traces) / n if n else 0.0,
        shortcut_rate_pct=100.0 * sum(t.shortcut for t in traces) / n if n else 0.0,
        mean_wall_time_ms=(
            sum(s.wall_time_ms for t in traces for s in t.steps) / n if n else 0.0
        ),
        usage_pct=usage,
        category_variance=category_variances(usage, registry),
        protocol_violations=sum(t.protocol_violations for t in traces),
        error_steps=sum(1 for t in traces for s in t.steps if s.error),
        aborted_episodes=sum(t.aborted for t in traces),
    )


# --- JSONL -------------------------------------------------------------------


def _step_json(step: TraceStep) -> dict:
    return {
        "kind": "step",
        "step": step.step,
        "allowed_categories": list(step.allowed_categories),
        "tool_name": step.tool_name,
        "effective_category": step.effective_category,
        "planner_args": step.planner_args,
        "args_digest": step.args_digest,
        "result_digest": step.result_digest,
        "frames_touched": list(step.frames_touched),
        "wall_time_ms": step.wall_time_ms,
        "error": step.error,
    }


def _header_json(trace: ToolchainTrace) -> dict:
    return {
        "kind": "header",
        "episode_id": trace.episode_id,
        "video_id": trace.video_id,
        "qa_id": trace.qa_id,
        "question_kind": trace.question_kind,
        "strategy": trace.strategy,
        "planner": trace.planner,
        "noise_seed": trace.noise_seed,
        "initial_frames": list(trace.initial_frames),
    }


def _final_json(trace: ToolchainTrace) -> dict:
    return {
        "kind": "final",
        "final_answer": trace.final_answer,
        "correct": trace.correct,
        "shortcut": trace.shortcut,
        "protocol_violations": trace.protocol_violations,
        "planner_fallback": trace.planner_fallback,
        "answer_text": trace.answer_text,
        "aborted": trace.aborted,
    }


def write_traces(traces: list[ToolchainTrace], path: str | Path) -> None:
    with open(path, "w") as fh:
        for trace in traces:
            fh.write(json.dumps(_header_json(trace), sort_keys=True) + "\n")
            for step in trace.steps:
                fh.write(json.dumps(_step_json(step), sort_keys=True) + "\n")
            fh.write(json.dumps(_final_json(trace), sort_keys=True) + "\n")


def _require(record: dict, fields: tuple[str, ...], line_no: int) -> None:
    for f in fields:
        if f not in record:
            raise TraceParseError(f"record missing field {f!r}", line_no)


def read_traces(path: str | Path) -> list[ToolchainTrace]:
    """Parse a trace file; malformed lines raise TraceParseError with the line number."""
    traces: list[ToolchainTrace] = []
    header: dict | None = None
    steps: list[TraceStep] = []
    header_line = 0
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(f"not valid JSON: {exc.msg}", line_no) from None
            if not isinstance(record, dict) or "kind" not in record:
                raise TraceParseError("expected an object with a 'kind' field", line_no)
            kind = record["kind"]
            if kind == "header":
                if header is not None:
                    raise TraceParseError("header while episode still open", line_no)
                _require(
                    record,
                    ("episode_id", "video_id", "qa_id", "question_kind", "strategy",
                     "planner", "noise_seed", "initial_frames"),
                    line_no,
                )
                header, steps, header_line = record, [], line_no
            elif kind == "step":
                if header is None:
                    raise TraceParseError("step before any header", line_no)
                _require(
                    record,
                    ("step", "allowed_categories", "tool_name", "effective_category",
                     "planner_args", "args_digest", "result_digest", "frames_touched",
                     "wall_time_ms"),
                    line_no,
                )
                steps.append(
                    TraceStep(
                        step=record["step"],
                        allowed_categories=tuple(record["allowed_categories"]),
                        tool_name=record["tool_name"],
                        effective_category=record["effective_category"],
                        planner_args=record["planner_args"],
                        args_digest=record["args_digest"],
                        result_digest=record["result_digest"],
                        frames_touched=tuple(record["frames_touched"]),
                        wall_time_ms=record["wall_time_ms"],
                        error=record.get("error"),
                    )
                )
            elif kind == "final":
                if header is None:
                    raise TraceParseError("final before any header", line_no)
                _require(record, ("final_answer", "correct", "shortcut"), line_no)
                traces.append(
                    ToolchainTrace(
                        episode_id=header["episode_id"],
                        video_id=header["video_id"],
                        qa_id=header["qa_id"],
                        question_kind=header["question_kind"],
                        strategy=header["strategy"],
                        planner=header["planner"],
                        noise_seed=header["noise_seed"],
                        initial_frames=tuple(header["initial_frames"]),
                        steps=tuple(steps),
                        final_answer=record["final_answer"],
                        correct=record["correct"],
                        shortcut=record["shortcut"],
                        protocol_violations=record.get("protocol_violations", 0),
                        planner_fallback=record.get("planner_fallback", False),
                        answer_text=record.get("answer_text", ""),
                        aborted=record.get("aborted", False),
                    )
                )
                header, steps = None, []
            else:
                raise TraceParseError(f"unknown record kind {kind!r}", line_no)
    if header is not None:
        raise TraceParseError("episode missing its final record", header_line)
    return traces


def save_report(report: RunReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n")


def format_report(report: RunReport) -> str:
    """Aligned text rendering of a report; the JSON form is save_report."""
    rows = [
        ("strategy", report.strategy),
        ("planner", report.planner),
        ("episodes", str(report.n_episodes)),
        ("accuracy", f"{report.accuracy_pct:.1f}%"),
        ("mean frames", f"{report.mean_frames:.1f}"),
        ("mean toolchain length", f"{report.mean_toolchain_length:.2f}"),
        ("mean distinct tools", f"{report.mean_distinct_tools:.2f}"),
        ("shortcut rate", f"{report.shortcut_rate_pct:.1f}%"),
        ("error steps", str(report.error_steps)),
        ("aborted episodes", str(report.aborted_episodes)),
    ]
    width = max(len(label) for label, _ in rows)
    lines = [f"{label:<{width}}  {value}" for label, value in rows]
    lines.append("")
    lines.append(f"{'tool':<22}  {'usage %':>7}")
    for name, pct in sorted(report.usage_pct.items(), key=lambda kv: (-kv[1], kv[0])):
        if pct > 0:
            lines.append(f"{name:<22}  {pct:>7.1f}")
    return "\n".join(lines)
