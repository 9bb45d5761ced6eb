"""Deterministic simulated tool backends over synthetic ground truth."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    ConfigurationError,
    EventNotFound,
    FrameNotVisible,
    IndexOutOfRange,
    InvalidRegion,
    ProtocolViolation,
    ToolNotFound,
)
from .model import (
    Box,
    QAInstance,
    Roi3D,
    Suite,
    SyntheticVideo,
    question_noun,
    roi_content_tokens,
)
from .seeding import derive_rng, derive_seed
from .textmatch import best_match, content_tokens, overlap, tokenize

GENERAL_TOOLS = frozenset({"text_summarizer", "video_summarizer", "video_qa"})

# Tools with no ground truth to consult; they return canned text keyed by args.
CANNED_TOOLS = frozenset({"google_search", "python_code_generator"})

_CANNED_FIXTURES = {
    "google_search": (
        "no relevant results for this query",
        "encyclopedia extract: general background, nothing video-specific",
        "forum thread: opinions differ, no authoritative answer",
        "news archive: coverage unrelated to the question",
    ),
    "python_code_generator": (
        "def solve():\n    return None  # nothing to compute for this task",
        "result = sorted([])\nprint(result)",
        "total = 0\nprint(total)",
        "# task underspecified; no program generated",
    ),
}


@dataclass(frozen=True)
class NoiseModel:
    seed: int = 0
    p_miss: float = 0.1
    jitter_frames: int = 2
    p_general_correct: float = 0.55
    p_roi_correct: float = 0.9

    def __post_init__(self):
        for name in ("p_miss", "p_general_correct", "p_roi_correct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must be in [0, 1], got {v}")
        if self.jitter_frames < 0:
            raise ConfigurationError(f"jitter_frames must be >= 0, got {self.jitter_frames}")


ZERO_NOISE = NoiseModel(p_miss=0.0, jitter_frames=0, p_general_correct=1.0, p_roi_correct=1.0)

DICTIONARY_EFFECTS = ("temporal_update", "annotation", "none")


@dataclass(frozen=True)
class ToolResult:
    tool_name: str
    payload: dict
    frames_touched: tuple[int, ...]
    dictionary_effect: str

    def __post_init__(self):
        if self.dictionary_effect not in DICTIONARY_EFFECTS:
            raise ProtocolViolation(f"bad dictionary_effect {self.dictionary_effect!r}")

    def to_json(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "payload": self.payload,
            "frames_touched": list(self.frames_touched),
            "dictionary_effect": self.dictionary_effect,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ToolResult":
        for field in ("tool_name", "payload", "frames_touched", "dictionary_effect"):
            if field not in data:
                raise ProtocolViolation(f"tool result missing field {field!r}")
        return cls(
            tool_name=data["tool_name"],
            payload=data["payload"],
            frames_touched=tuple(data["frames_touched"]),
            dictionary_effect=data["dictionary_effect"],
        )


def grid_layout(k: int) -> tuple[int, int]:
    """Grid shape for k thumbnails: near-square, rows first."""
    if k < 1:
        raise ConfigurationError(f"grid needs at least one frame, got {k}")
    rows = math.ceil(math.sqrt(k))
    cols = math.ceil(k / rows)
    return rows, cols


def uniform_indices(lo: int, hi: int, limit: int = 16) -> list[int]:
    """Up to `limit` uniform indices across the inclusive interval [lo, hi]."""
    length = hi - lo + 1
    if length <= limit:
        return list(range(lo, hi + 1))
    raw = [lo + int(k * (length - 1) / (limit - 1) + 0.5) for k in range(limit)]
    out = []
    for idx in raw:
        if idx not in out:
            out.append(idx)
    return out


def _nearest(frames: list[int], target: int) -> int:
    return min(frames, key=lambda f: (abs(f - target), f))


def _annotation_entries(args: dict) -> list[dict]:
    entries = args.get("annotations") or []
    if not isinstance(entries, list):
        raise ProtocolViolation("annotations must be a list")
    return entries


class SimToolbox:
    """Executes tool calls against ground truth; stateless given (suite, noise, args)."""

    def __init__(self, videos: dict[str, SyntheticVideo], qas: dict[str, QAInstance], noise: NoiseModel | None = None):
        self.videos = dict(videos)
        self.qas = dict(qas)
        self.noise = noise or NoiseModel()

    @classmethod
    def from_suite(cls, suite: Suite, noise: NoiseModel | None = None) -> "SimToolbox":
        return cls(
            videos={item.video.video_id: item.video for item in suite.items},
            qas={item.qa.qa_id: item.qa for item in suite.items},
            noise=noise,
        )

    @classmethod
    def for_item(cls, video: SyntheticVideo, qa: QAInstance | None = None, noise: NoiseModel | None = None) -> "SimToolbox":
        return cls(
            videos={video.video_id: video},
            qas={qa.qa_id: qa} if qa else {},
            noise=noise,
        )

    # -- plumbing --------------------------------------------------------------

    def _video(self, args: dict) -> SyntheticVideo:
        vid = args.get("video_id")
        if vid not in self.videos:
            raise ProtocolViolation(f"unknown video_id {vid!r}")
        return self.videos[vid]

    def _rng(self, tool: str, args: dict):
        return derive_rng(
            self.noise.seed, args.get("episode_id", "-"), tool, args.get("call_ordinal", 0)
        )

    def _check_span(self, video: SyntheticVideo, span) -> tuple[int, int]:
        if (
            not isinstance(span, (list, tuple))
            or len(span) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in span)
        ):
            raise ProtocolViolation(f"bad span {span!r}")
        lo, hi = span
        if lo > hi or lo < 0 or hi >= video.frame_count:
            raise IndexOutOfRange(f"span {span!r} outside [0, {video.frame_count - 1}]")
        return lo, hi

    def _target_frames(self, video: SyntheticVideo, args: dict, visible: list[int]) -> list[int]:
        targets = args.get("frames", visible)
        if not isinstance(targets, list) or not all(
            isinstance(f, int) and not isinstance(f, bool) for f in targets
        ):
            raise ProtocolViolation(f"bad frames list {targets!r}")
        allowed = set(visible)
        for f in targets:
            if not 0 <= f < video.frame_count:
                raise IndexOutOfRange(f"frame {f} outside [0, {video.frame_count - 1}]")
            if f not in allowed:
                raise FrameNotVisible(f"frame {f} is not in the visible set")
        return targets

    def _crop(self, args: dict, frame: int) -> Box | None:
        crops = args.get("crops") or {}
        data = crops.get(str(frame))
        if data is None:
            return None
        box = Box(*data)
        if not box.well_formed():
            raise InvalidRegion(f"crop {data!r}")
        return box

    def _frame_content(self, video: SyntheticVideo, frame: int, crop: Box | None):
        rec = video.frames[frame]
        objs = [o for o in rec.objects if crop is None or o.bbox.intersects(crop)]
        texts = [t for t in rec.texts if crop is None or t.bbox.intersects(crop)]
        events = [
            e
            for e in video.events
            if e.span[0] <= frame <= e.span[1]
            and (crop is None or e.region is None or e.region.intersects(crop))
        ]
        return objs, texts, events

    # -- dispatch --------------------------------------------------------------

    def supported(self) -> list[str]:
        return sorted(self._HANDLERS)

    def invoke(self, tool: str, args: dict, frames: list[int]) -> ToolResult:
        handler = self._HANDLERS.get(tool)
        if handler is None:
            raise ToolNotFound(tool)
        return handler(self, args, list(frames))

    # -- temporal tools --------------------------------------------------------

    def _ground_event(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("temporal_grounding", args)
        query = str(args.get("query", ""))
        labels = [e.label for e in video.events]
        ranked = sorted(
            range(len(labels)), key=lambda i: (-overlap(query, labels[i]), i)
        )
        candidates = [i for i in ranked if overlap(query, labels[i]) >= 1]
        if candidates and rng.random() < self.noise.p_miss:
            candidates = candidates[1:]  # the strongest match goes unnoticed
        if not candidates:
            raise EventNotFound(f"no event matches {query!r}")
        event = video.events[candidates[0]]
        j = self.noise.jitter_frames
        lo = event.span[0] + (rng.randint(-j, j) if j else 0)
        hi = event.span[1] + (rng.randint(-j, j) if j else 0)
        lo = max(0, min(video.frame_count - 1, lo))
        hi = max(0, min(video.frame_count - 1, hi))
        if lo > hi:
            lo, hi = hi, lo
        payload = {
            "span": [lo, hi],
            "event": event.label,
            "annotations": [
                {
                    "frame": _nearest(visible, lo) if visible else 0,
                    "kind": "custom",
                    "payload": f"grounded '{event.label}' to frames {lo}..{hi}",
                    "extra": [lo, hi],
                }
            ],
        }
        return ToolResult("temporal_grounding", payload, (), "annotation")

    def _refer_interval(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("temporal_referring", args)
        lo, hi = self._check_span(video, args.get("span"))
        events = [e for e in video.events if e.span[0] <= hi and lo <= e.span[1]]
        events.sort(key=lambda e: e.span)
        kept = [e for e in events if rng.random() >= self.noise.p_miss]
        text = "events: " + "; ".join(e.label for e in kept) if kept else "no salient events"
        inside = [f for f in visible if lo <= f <= hi]
        anchor = _nearest(inside or visible, lo) if visible else 0
        payload = {
            "text": text,
            "annotations": [{"frame": anchor, "kind": "custom", "payload": text, "extra": None}],
        }
        return ToolResult("temporal_referring", payload, (), "annotation")

    def _trim_video(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        lo, hi = self._check_span(video, args.get("span"))
        kept = [f for f in visible if lo <= f <= hi]
        selection = sorted(set(kept) | set(uniform_indices(lo, hi)))
        payload = {"selection": selection, "span": [lo, hi]}
        return ToolResult("video_trimmer", payload, (), "temporal_update")

    def _select_frames(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        variant = args.get("variant", "vanilla")
        question = str(args.get("query", ""))
        entries = _annotation_entries(args)
        per_frame: dict[int, list[str]] = {f: [] for f in visible}
        for entry in entries:
            frame = entry.get("frame")
            if frame in per_frame:
                per_frame[frame].append(str(entry.get("payload", "")))
        scores = {
            f: overlap(question, " ".join(payloads)) for f, payloads in per_frame.items()
        }
        matched = sorted(
            (f for f in visible if scores[f] >= 1), key=lambda f: (-scores[f], f)
        )
        if variant == "grid":
            keep = args.get("keep")
            selection = sorted(set(keep)) if keep else list(visible)
            note = "grid: planner kept " + (str(selection) if keep else "all")
        elif variant == "akeys":
            additions: set[int] = set()
            sigs = {
                f: frozenset(content_tokens(" ".join(per_frame[f]))) for f in visible
            }
            ordered = sorted(visible)
            for a, b in zip(ordered, ordered[1:]):
                if sigs[a] != sigs[b]:
                    additions.add(a)
                    additions.add(b)
            base = matched if matched else list(visible)
            selection = sorted(set(base) | additions)
            note = f"akeys: {len(matched)} matched, {len(additions)} boundary frames added"
        elif variant == "vanilla":
            selection = matched if matched else list(visible)
            note = "vanilla: kept all (no annotation matched)" if not matched else f"vanilla: kept {len(matched)}"
        else:
            raise ProtocolViolation(f"unknown selector variant {variant!r}")
        if not selection:
            selection = list(visible)  # a selector never empties the dictionary
        payload = {"selection": selection, "variant": variant, "note": note}
        return ToolResult("frame_selector", payload, (), "temporal_update")

    def _localize_action(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("action_localization", args)
        action = str(args.get("action", ""))
        labels = [e.label for e in video.events]
        idx, score = best_match(action, labels)
        if idx >= 0 and rng.random() < self.noise.p_miss:
            idx, score = -1, 0
        if idx < 0 or score < 1:
            raise EventNotFound(f"no action matches {action!r}")
        lo, hi = video.events[idx].span
        inside = [f for f in visible if lo <= f <= hi]
        if inside:
            payload = {"selection": inside, "span": [lo, hi], "event": labels[idx]}
            return ToolResult("action_localization", payload, (), "temporal_update")
        anchor = _nearest(visible, lo) if visible else 0
        note = f"'{labels[idx]}' spans frames {lo}..{hi}; none visible"
        payload = {
            "selection": [],
            "span": [lo, hi],
            "event": labels[idx],
            "annotations": [{"frame": anchor, "kind": "custom", "payload": note, "extra": [lo, hi]}],
        }
        return ToolResult("action_localization", payload, (), "annotation")

    # -- spatial tools ---------------------------------------------------------

    def _caption_one(self, video: SyntheticVideo, frame: int, crop: Box | None, rng) -> str:
        objs, texts, events = self._frame_content(video, frame, crop)
        keep_objs, seen = [], set()
        for o in objs:
            if o.label not in seen and rng.random() >= self.noise.p_miss:
                keep_objs.append(o.label)
                seen.add(o.label)
        keep_texts = [t.content for t in texts if rng.random() >= self.noise.p_miss]
        keep_events = [e.label for e in events if rng.random() >= self.noise.p_miss]
        return "objects: {}; text: {}; events: {}".format(
            ", ".join(keep_objs) or "-",
            ", ".join(keep_texts) or "-",
            ", ".join(keep_events) or "-",
        )

    def _image_captioner(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("image_captioner", args)
        targets = self._target_frames(video, args, visible)
        annotations = []
        for frame in targets:
            caption = self._caption_one(video, frame, self._crop(args, frame), rng)
            annotations.append({"frame": frame, "kind": "caption", "payload": caption, "extra": None})
        payload = {"annotations": annotations}
        return ToolResult("image_captioner", payload, tuple(targets), "annotation")

    def _answer_from_content(self, question: str, objs, texts, rng) -> str:
        q = question.lower()
        noun = question_noun(question)
        if "color" in q and noun:
            for o in objs:
                head, _, tail = o.label.partition(" ")
                if tail == noun and rng.random() >= self.noise.p_miss:
                    return head
            return "unknown"
        if "say" in q or "text" in q or "sign" in q or "read" in q:
            for t in texts:
                if rng.random() >= self.noise.p_miss:
                    return t.content
            return "unknown"
        if "how many" in q and noun:
            ids = {o.instance_id for o in objs if o.label.split()[-1] == noun}
            return str(len(ids))
        return "unknown"

    def _image_qa(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("image_qa", args)
        targets = self._target_frames(video, args, visible)
        question = str(args.get("question", ""))
        objs, texts = [], []
        seen_ids, seen_texts = set(), set()
        for frame in targets:
            o, t, _ = self._frame_content(video, frame, self._crop(args, frame))
            for obj in o:
                if obj.instance_id not in seen_ids:
                    objs.append(obj)
                    seen_ids.add(obj.instance_id)
            for text in t:
                if text.content not in seen_texts:
                    texts.append(text)
                    seen_texts.add(text.content)
        answer = self._answer_from_content(question, objs, texts, rng)
        anchor = targets[0] if targets else (visible[0] if visible else 0)
        payload = {
            "text": answer,
            "annotations": [{"frame": anchor, "kind": "qa_answer", "payload": answer, "extra": None}],
        }
        return ToolResult("image_qa", payload, tuple(targets), "annotation")

    def _text_detector(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("text_detector", args)
        targets = self._target_frames(video, args, visible)
        blocks, annotations = [], []
        for frame in targets:
            _, texts, _ = self._frame_content(video, frame, self._crop(args, frame))
            kept = [t for t in texts if rng.random() >= self.noise.p_miss]
            for t in kept:
                blocks.append({"frame": frame, "content": t.content, "bbox": t.bbox.as_list()})
            if kept:
                annotations.append(
                    {
                        "frame": frame,
                        "kind": "ocr",
                        "payload": "; ".join(t.content for t in kept),
                        "extra": None,
                    }
                )
        payload = {"blocks": blocks, "annotations": annotations}
        effect = "annotation" if annotations else "none"
        return ToolResult("text_detector", payload, tuple(targets), effect)

    def _object_detector(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("object_detector", args)
        targets = self._target_frames(video, args, visible)
        query = args.get("query_label")
        detections, annotations = [], []
        for frame in targets:
            objs, _, _ = self._frame_content(video, frame, self._crop(args, frame))
            hits = []
            for o in objs:
                if query and overlap(str(query), o.label) < 1:
                    continue
                if rng.random() < self.noise.p_miss:
                    continue
                hits.append(o)
                detections.append(
                    {"frame": frame, "label": o.label, "instance_id": o.instance_id, "bbox": o.bbox.as_list()}
                )
            if hits:
                annotations.append(
                    {
                        "frame": frame,
                        "kind": "detection",
                        "payload": ", ".join(o.label for o in hits),
                        "extra": None,
                    }
                )
        payload = {"detections": detections, "annotations": annotations}
        effect = "annotation" if annotations else "none"
        return ToolResult("object_detector", payload, tuple(targets), effect)

    def _patch_zoomer(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        frame = args.get("frame")
        if not isinstance(frame, int) or isinstance(frame, bool) or not 0 <= frame < video.frame_count:
            raise IndexOutOfRange(f"frame {frame!r} outside [0, {video.frame_count - 1}]")
        data = args.get("bbox")
        if not isinstance(data, (list, tuple)) or len(data) != 4:
            raise InvalidRegion(f"bbox {data!r}")
        box = Box(*[float(x) for x in data])
        if not box.well_formed():
            raise InvalidRegion(f"degenerate bbox {data!r}")
        note = f"crop [{box.x0}, {box.y0}, {box.x1}, {box.y1}]"
        payload = {
            "frame": frame,
            "crop": box.as_list(),
            "annotations": [
                {"frame": frame, "kind": "zoom_ref", "payload": note, "extra": box.as_list()}
            ],
        }
        return ToolResult("patch_zoomer", payload, (frame,), "annotation")

    def _bbox_marker(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        frame = args.get("frame")
        if not isinstance(frame, int) or isinstance(frame, bool) or not 0 <= frame < video.frame_count:
            raise IndexOutOfRange(f"frame {frame!r} outside [0, {video.frame_count - 1}]")
        query = args.get("label")
        objs, _, _ = self._frame_content(video, frame, self._crop(args, frame))
        marks, seen = [], set()
        for o in objs:
            if o.instance_id in seen:
                continue
            if query and overlap(str(query), o.label) < 1:
                continue
            seen.add(o.instance_id)
            marks.append({"id": len(marks) + 1, "label": o.label, "bbox": o.bbox.as_list()})
        text = ", ".join(f"{m['id']}: {m['label']}" for m in marks) or "no marks"
        payload = {
            "marks": marks,
            "annotations": [{"frame": frame, "kind": "marker", "payload": text, "extra": None}],
        }
        return ToolResult("bbox_marker", payload, (frame,), "annotation")

    # -- both-category tools ---------------------------------------------------

    def _object_tracker(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("object_tracker", args)
        lo, hi = self._check_span(video, args.get("span"))
        label = str(args.get("label", ""))
        survivors: set[int] = set()
        names: dict[int, str] = {}
        for frame in range(lo, hi + 1):
            for o in video.frames[frame].objects:
                if overlap(label, o.label) < 1:
                    continue
                names[o.instance_id] = o.label
                if rng.random() >= self.noise.p_miss:
                    survivors.add(o.instance_id)
        count = len(survivors)
        note = f"{count} distinct {label} tracked in frames {lo}..{hi}"
        inside = [f for f in visible if lo <= f <= hi]
        anchor = _nearest(inside or visible, lo) if visible else 0
        payload = {
            "count": count,
            "label": label,
            "instances": sorted(survivors),
            "annotations": [{"frame": anchor, "kind": "custom", "payload": note, "extra": None}],
        }
        return ToolResult("object_tracker", payload, tuple(range(lo, hi + 1)), "annotation")

    def _image_grid_qa(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        rng = self._rng("image_grid_qa", args)
        targets = self._target_frames(video, args, visible)
        if not targets:
            raise ProtocolViolation("image_grid_qa needs at least one frame")
        rows, cols = grid_layout(len(targets))
        question = str(args.get("question", ""))
        objs, texts = [], []
        seen_ids, seen_texts = set(), set()
        for frame in targets:
            o, t, _ = self._frame_content(video, frame, self._crop(args, frame))
            for obj in o:
                if obj.instance_id not in seen_ids:
                    objs.append(obj)
                    seen_ids.add(obj.instance_id)
            for text in t:
                if text.content not in seen_texts:
                    texts.append(text)
                    seen_texts.add(text.content)
        answer = self._answer_from_content(question, objs, texts, rng)
        payload = {
            "text": answer,
            "rows": rows,
            "cols": cols,
            "annotations": [
                {"frame": targets[0], "kind": "qa_answer", "payload": answer, "extra": None}
            ],
        }
        return ToolResult("image_grid_qa", payload, tuple(targets), "annotation")

    # -- general tools ---------------------------------------------------------

    def _qa(self, args: dict) -> QAInstance:
        qa_id = args.get("qa_id")
        if qa_id not in self.qas:
            raise ProtocolViolation(f"unknown qa_id {qa_id!r}")
        return self.qas[qa_id]

    def _covered(self, video: SyntheticVideo, roi: Roi3D, visible: list[int], entries: list[dict]) -> bool:
        lo, hi = roi.span
        if not any(lo <= f <= hi for f in visible):
            return False
        roi_tokens = roi_content_tokens(video, roi)
        for entry in entries:
            if entry.get("source_tool") in GENERAL_TOOLS:
                continue  # prior guesses are not gathered evidence
            if content_tokens(str(entry.get("payload", ""))) & roi_tokens:
                return True
        return False

    def _pick_answer(self, qa: QAInstance, correct: bool, rng) -> str:
        if correct:
            return qa.options[qa.correct_index]
        wrong = [o for i, o in enumerate(qa.options) if i != qa.correct_index]
        return rng.choice(wrong) if wrong else qa.options[qa.correct_index]

    def _general(self, tool: str, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        qa = self._qa(args)
        rng = self._rng(tool, args)
        if tool == "text_summarizer":
            covered = self._covered(video, qa.roi, visible, _annotation_entries(args))
            p = self.noise.p_roi_correct if covered else self.noise.p_general_correct
            touched: tuple[int, ...] = ()
        else:
            covered = False
            p = self.noise.p_general_correct
            touched = tuple(range(video.frame_count))
        answer = self._pick_answer(qa, rng.random() < p, rng)
        anchor = visible[0] if visible else 0
        payload = {
            "text": answer,
            "covered": covered,
            "annotations": [
                {"frame": anchor, "kind": "qa_answer", "payload": f"answer: {answer}", "extra": None}
            ],
        }
        return ToolResult(tool, payload, touched, "annotation")

    def _text_summarizer(self, args, visible):
        return self._general("text_summarizer", args, visible)

    def _video_summarizer(self, args, visible):
        return self._general("video_summarizer", args, visible)

    def _video_qa(self, args, visible):
        return self._general("video_qa", args, visible)

    # -- no-ground-truth and aggregate tools ------------------------------------

    def _object_identifier(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        query_tokens = set(tokenize(str(args.get("query", ""))))
        gt_tokens: set[str] = set()
        for frame in visible:
            for o in video.frames[frame].objects:
                gt_tokens |= content_tokens(o.label)
        hits = sorted(t for t in gt_tokens if t in query_tokens or f"{t}s" in query_tokens)
        text = ", ".join(hits) if hits else "no known objects mentioned"
        anchor = visible[0] if visible else 0
        payload = {
            "text": text,
            "objects": hits,
            "annotations": (
                [{"frame": anchor, "kind": "custom", "payload": f"key objects: {text}", "extra": None}]
                if hits
                else []
            ),
        }
        return ToolResult(
            "object_identifier", payload, tuple(visible), "annotation" if hits else "none"
        )

    def _action_recognition(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        lo, hi = self._check_span(video, args.get("span"))
        events = [e for e in video.events if e.span[0] <= hi and lo <= e.span[1]]
        events.sort(key=lambda e: e.span)
        labels = [e.label for e in events]
        text = "actions: " + "; ".join(labels) if labels else "no recognizable action"
        inside = [f for f in visible if lo <= f <= hi]
        anchor = _nearest(inside or visible, lo) if visible else 0
        payload = {
            "text": text,
            "actions": labels,
            "annotations": [{"frame": anchor, "kind": "custom", "payload": text, "extra": None}],
        }
        return ToolResult("action_recognition", payload, tuple(range(lo, hi + 1)), "annotation")

    def _multiple_image_qa(self, args: dict, visible: list[int]) -> ToolResult:
        # Same reading rules as image_qa, reported under this tool's name.
        inner = self._image_qa(args, visible)
        return ToolResult("multiple_image_qa", inner.payload, inner.frames_touched, inner.dictionary_effect)

    def _semantic_segmentation(self, args: dict, visible: list[int]) -> ToolResult:
        video = self._video(args)
        frame = args.get("frame")
        if not isinstance(frame, int) or isinstance(frame, bool) or not 0 <= frame < video.frame_count:
            raise IndexOutOfRange(f"frame {frame!r} outside [0, {video.frame_count - 1}]")
        objs, _, _ = self._frame_content(video, frame, self._crop(args, frame))
        segments, seen = [], set()
        for o in objs:
            if o.instance_id in seen:
                continue
            seen.add(o.instance_id)
            segments.append({"label": o.label, "bbox": o.bbox.as_list()})
        text = "segments: " + (", ".join(s["label"] for s in segments) or "-")
        payload = {
            "segments": segments,
            "annotations": [{"frame": frame, "kind": "custom", "payload": text, "extra": None}],
        }
        return ToolResult("semantic_segmentation", payload, (frame,), "annotation")

    def _canned(self, tool: str, args: dict, visible: list[int]) -> ToolResult:
        fixtures = _CANNED_FIXTURES[tool]
        public = {
            k: args[k]
            for k in sorted(args)
            if k not in ("video_id", "episode_id", "call_ordinal", "qa_id", "crops", "annotations")
        }
        key = derive_seed(tool, repr(public)) % len(fixtures)
        return ToolResult(tool, {"text": fixtures[key], "fixture": key}, (), "none")

    def _google_search(self, args, visible):
        return self._canned("google_search", args, visible)

    def _python_code_generator(self, args, visible):
        return self._canned("python_code_generator", args, visible)

    _HANDLERS = {
        "temporal_grounding": _ground_event,
        "temporal_referring": _refer_interval,
        "video_trimmer": _trim_video,
        "frame_selector": _select_frames,
        "action_localization": _localize_action,
        "image_captioner": _image_captioner,
        "image_qa": _image_qa,
        "text_detector": _text_detector,
        "object_detector": _object_detector,
        "patch_zoomer": _patch_zoomer,
        "bbox_marker": _bbox_marker,
        "object_tracker": _object_tracker,
        "image_grid_qa": _image_grid_qa,
        "object_identifier": _object_identifier,
        "action_recognition": _action_recognition,
        "multiple_image_qa": _multiple_image_qa,
        "semantic_segmentation": _semantic_segmentation,
        "google_search": _google_search,
        "python_code_generator": _python_code_generator,
        "text_summarizer": _text_summarizer,
        "video_summarizer": _video_summarizer,
        "video_qa": _video_qa,
    }
