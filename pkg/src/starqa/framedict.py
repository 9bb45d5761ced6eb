"""Visible frame dictionary: the evolving set of sampled frames and their annotations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyVideo, FrameNotVisible, IndexOutOfRange, WouldEmptyDictionary
from .model import SyntheticVideo

ANNOTATION_KINDS = (
    "caption",
    "qa_answer",
    "detection",
    "ocr",
    "marker",
    "zoom_ref",
    "custom",
)


@dataclass(frozen=True)
class Annotation:
    kind: str
    payload: str
    source_tool: str
    step: int
    # Machine-readable companion to payload, e.g. crop coordinates for zoom_ref.
    extra: tuple | None = None

    def __post_init__(self):
        if self.kind not in ANNOTATION_KINDS:
            raise ValueError(f"unknown annotation kind {self.kind!r}")


@dataclass
class FrameInfo:
    annotations: list[Annotation] = field(default_factory=list)


@dataclass(frozen=True)
class MutationRecord:
    """One history entry; the sequence of records replays to an identical dictionary."""

    step: int
    op: str  # init | update | annotate
    tool: str
    frames: tuple[int, ...] = ()  # visible set after init/update
    frame: int | None = None  # annotate target
    annotation: Annotation | None = None
    archived: tuple[tuple[int, tuple[Annotation, ...]], ...] = ()  # frames dropped by update


class VisibleFrameDictionary:
    """Ordered frame_index -> FrameInfo map with full mutation history.

    Removals archive their annotations; nothing is ever silently deleted.
    """

    def __init__(self, frame_count: int):
        if frame_count < 1:
            raise EmptyVideo(f"frame_count {frame_count}")
        self.frame_count = frame_count
        self._entries: dict[int, FrameInfo] = {}
        self._log: list[tuple[int, Annotation]] = []
        self.history: list[MutationRecord] = []
        self.removed_archive: list[tuple[int, int, tuple[Annotation, ...]]] = []

    # -- queries ---------------------------------------------------------------

    def visible_frames(self) -> list[int]:
        return sorted(self._entries)

    def __contains__(self, frame: int) -> bool:
        return frame in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def annotations_for(self, frame: int) -> list[Annotation]:
        if frame not in self._entries:
            raise FrameNotVisible(str(frame))
        return list(self._entries[frame].annotations)

    def annotation_log(self) -> list[tuple[int, Annotation]]:
        return list(self._log)

    def latest_crop(self, frame: int) -> tuple | None:
        """Active zoom crop for a frame, if any."""
        for frame_i, ann in reversed(self._log):
            if frame_i == frame and ann.kind == "zoom_ref" and ann.extra is not None:
                return ann.extra
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, VisibleFrameDictionary):
            return NotImplemented
        return (
            self.frame_count == other.frame_count
            and {k: v.annotations for k, v in self._entries.items()}
            == {k: v.annotations for k, v in other._entries.items()}
            and self._log == other._log
        )

    # -- mutations -------------------------------------------------------------

    def _check_bounds(self, frames: Iterable[int]) -> list[int]:
        out = []
        for f in frames:
            if not isinstance(f, int) or isinstance(f, bool) or not 0 <= f < self.frame_count:
                raise IndexOutOfRange(f"frame {f!r} outside [0, {self.frame_count - 1}]")
            out.append(f)
        return out

    def _init(self, frames: list[int], step: int, tool: str) -> None:
        frames = sorted(set(self._check_bounds(frames)))
        if not frames:
            raise WouldEmptyDictionary("initial sample is empty")
        self._entries = {f: FrameInfo() for f in frames}
        self.history.append(MutationRecord(step=step, op="init", tool=tool, frames=tuple(frames)))

    def apply_temporal_update(self, selection: Iterable[int], step: int, tool: str) -> None:
        """Replace the visible set; removed frames keep their annotations in the archive."""
        target = sorted(set(self._check_bounds(selection)))
        if not target:
            raise WouldEmptyDictionary(f"update from {tool!r} would remove every visible frame")
        removed = [f for f in self._entries if f not in target]
        archived = tuple((f, tuple(self._entries[f].annotations)) for f in sorted(removed))
        for f in removed:
            self.removed_archive.append((step, f, tuple(self._entries[f].annotations)))
            del self._entries[f]
        for f in target:
            if f not in self._entries:
                self._entries[f] = FrameInfo()
        self._log = [(f, ann) for f, ann in self._log if f in self._entries]
        self.history.append(
            MutationRecord(step=step, op="update", tool=tool, frames=tuple(target), archived=archived)
        )

    def annotate(self, frame: int, annotation: Annotation) -> None:
        if frame not in self._entries:
            raise FrameNotVisible(f"frame {frame} is not visible")
        self._entries[frame].annotations.append(annotation)
        self._log.append((frame, annotation))
        self.history.append(
            MutationRecord(
                step=annotation.step, op="annotate", tool=annotation.source_tool,
                frame=frame, annotation=annotation,
            )
        )

    # -- rendering -------------------------------------------------------------

    def render_context(self, budget_chars: int = 8000) -> str:
        """Deterministic planner-facing text; drops oldest annotations first under pressure."""

        def build(dropped: set[int]) -> str:
            lines = []
            kept = [
                (f, ann) for i, (f, ann) in enumerate(self._log) if i not in dropped
            ]
            per_frame: dict[int, list[Annotation]] = {f: [] for f in self._entries}
            for f, ann in kept:
                per_frame[f].append(ann)
            for f in sorted(per_frame):
                anns = per_frame[f]
                if anns:
                    body = "; ".join(f"{a.kind}={a.payload}" for a in anns)
                else:
                    body = "-"
                lines.append(f"frame {f}: {body}")
            return "\n".join(lines)

        text = build(set())
        if len(text) <= budget_chars:
            return text

        marker = "[context truncated]"
        order = sorted(range(len(self._log)), key=lambda i: (self._log[i][1].step, i))
        dropped: set[int] = set()
        for i in order:
            dropped.add(i)
            text = build(dropped)
            if len(marker) + 1 + len(text) <= budget_chars:
                return marker + "\n" + text
        # All annotations gone; shed frame lines from the front.
        frames = sorted(self._entries)
        while frames:
            frames = frames[1:]
            text = "\n".join(f"frame {f}: -" for f in frames)
            if frames and len(marker) + 1 + len(text) <= budget_chars:
                return marker + "\n" + text
        return marker[:budget_chars] if budget_chars < len(marker) else marker

    # -- replay ----------------------------------------------------------------

    @classmethod
    def replay(cls, frame_count: int, history: list[MutationRecord]) -> "VisibleFrameDictionary":
        d = cls(frame_count)
        for rec in history:
            if rec.op == "init":
                d._init(list(rec.frames), rec.step, rec.tool)
            elif rec.op == "update":
                d.apply_temporal_update(list(rec.frames), rec.step, rec.tool)
            elif rec.op == "annotate":
                d.annotate(rec.frame, rec.annotation)
            else:
                raise ValueError(f"unknown history op {rec.op!r}")
        return d


def initial_sample_indices(duration_s: float, fps: float) -> list[int]:
    """Uniform key indices for a fresh dictionary.

    Longer than 16 seconds: exactly 16 uniform keys. Otherwise one key per second.
    Rounding is half-up, not banker's.
    """
    n = math.floor(duration_s * fps)
    if n < 1:
        raise EmptyVideo(f"duration {duration_s}s at {fps} fps has no frames")
    if duration_s > 16.0:
        if n == 1:
            return [0]
        raw = [int(k * (n - 1) / 15 + 0.5) for k in range(16)]
    else:
        seconds = max(1, math.floor(duration_s))
        raw = [min(n - 1, int(t * fps + 0.5)) for t in range(seconds)]
    out = []
    for idx in raw:
        if idx not in out:
            out.append(idx)
    return out


def init_uniform_sample(video: SyntheticVideo, step: int = 0) -> VisibleFrameDictionary:
    if video.frame_count == 0:
        raise EmptyVideo(video.video_id)
    d = VisibleFrameDictionary(video.frame_count)
    d._init(initial_sample_indices(video.duration_s, video.fps), step, "initial_sample")
    return d
