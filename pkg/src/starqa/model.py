"""Synthetic video ground truth and question generation."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import ConfigurationError, Unsatisfiable
from .seeding import derive_rng, derive_seed
from .textmatch import content_tokens

Span = tuple[int, int]  # inclusive frame interval


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in normalized [0, 1] image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float

    def well_formed(self) -> bool:
        return 0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0

    def intersects(self, other: "Box") -> bool:
        return not (
            self.x1 <= other.x0
            or other.x1 <= self.x0
            or self.y1 <= other.y0
            or other.y1 <= self.y0
        )

    def intersection(self, other: "Box") -> "Box | None":
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1, y1 = min(self.x1, other.x1), min(self.y1, other.y1)
        if x0 < x1 and y0 < y1:
            return Box(x0, y0, x1, y1)
        return None

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


FULL_FRAME = Box(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class ObjectGT:
    label: str
    instance_id: int
    bbox: Box


@dataclass(frozen=True)
class TextGT:
    content: str
    bbox: Box


@dataclass(frozen=True)
class EventGT:
    label: str
    span: Span
    region: Box | None = None


@dataclass(frozen=True)
class FrameRecord:
    index: int
    objects: tuple[ObjectGT, ...] = ()
    texts: tuple[TextGT, ...] = ()


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    duration_s: float
    fps: float
    frames: tuple[FrameRecord, ...]
    events: tuple[EventGT, ...]

    @property
    def frame_count(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Roi3D:
    """The minimal spatio-temporal region that determines a question's answer."""

    span: Span
    bbox: Box


QUESTION_KINDS = (
    "locate_text",
    "count_objects",
    "event_order",
    "attribute_in_event",
    "global_theme",
)


@dataclass(frozen=True)
class QAInstance:
    qa_id: str
    video_id: str
    question: str
    options: tuple[str, ...]
    correct_index: int
    roi: Roi3D
    question_kind: str


@dataclass(frozen=True)
class SuiteItem:
    video: SyntheticVideo
    qa: QAInstance


@dataclass
class GenerationProfile:
    duration_range: tuple[float, float] = (48.0, 96.0)
    fps: float = 1.0
    n_objects: tuple[int, int] = (3, 6)
    n_events: tuple[int, int] = (3, 5)
    n_texts: tuple[int, int] = (1, 3)
    color_fraction: float = 0.6


def validate_profile(profile: GenerationProfile) -> None:
    lo, hi = profile.duration_range
    if lo <= 0 or hi < lo:
        raise ConfigurationError(f"bad duration range {profile.duration_range}")
    if profile.fps <= 0:
        raise ConfigurationError(f"fps must be positive, got {profile.fps}")
    if math.floor(lo * profile.fps) < 1:
        raise ConfigurationError("profile admits videos with zero frames")
    for name in ("n_objects", "n_events", "n_texts"):
        a, b = getattr(profile, name)
        if a > b or b < 0:
            raise ConfigurationError(f"bad range for {name}: ({a}, {b})")
    if profile.n_events[0] < 1 or profile.n_objects[0] < 1:
        raise ConfigurationError("profiles must yield at least one event and one object")
    if not 0.0 <= profile.color_fraction <= 1.0:
        raise ConfigurationError(f"bad color_fraction {profile.color_fraction}")


COLORS = ("red", "blue", "green", "yellow", "white", "black")

# Each theme uses two event subjects with three events apiece, so a question
# that names only the subject leaves grounding genuinely ambiguous.
THEMES: dict[str, dict[str, tuple[str, ...]]] = {
    "cooking": {
        "objects": ("chef", "pan", "kettle", "tomato", "bowl"),
        "events": (
            "chef chops vegetables",
            "chef stirs soup",
            "chef plates dinner",
            "kettle whistles sharply",
            "kettle boils over",
            "kettle rattles on the stove",
        ),
        "texts": ("MENU", "FRESH", "KITCHEN", "DAILY SPECIAL"),
    },
    "street": {
        "objects": ("car", "bus", "cyclist", "truck", "scooter"),
        "events": (
            "bus stops at the station",
            "bus pulls away",
            "bus idles at the corner",
            "cyclist crosses junction",
            "cyclist waits at lights",
            "cyclist weaves through traffic",
        ),
        "texts": ("STOP", "YIELD", "ONE WAY", "EXIT 12"),
    },
    "sports": {
        "objects": ("player", "ball", "referee", "goalkeeper", "flag"),
        "events": (
            "player kicks ball",
            "player scores goal",
            "player takes corner",
            "goalkeeper saves shot",
            "goalkeeper clears ball",
            "goalkeeper dives low",
        ),
        "texts": ("HOME 2", "GOAL", "FINAL", "SOUTH STAND"),
    },
    "household": {
        "objects": ("person", "dog", "cat", "sofa", "ladder"),
        "events": (
            "person opens door",
            "person waters plants",
            "person climbs ladder",
            "cat knocks over vase",
            "cat naps on sofa",
            "cat paws at window",
        ),
        "texts": ("WELCOME", "SALE", "NO JUNK MAIL", "BEWARE OF DOG"),
    },
}

# Share of questions that point at their anchor event by subject alone
# ("while the bus is on screen") instead of quoting the full label.
VAGUE_MENTION_RATE = 0.75


def _event_mention(rng, event: EventGT, avoid: str | None = None) -> str:
    subject = event.label.split()[0]
    if subject != avoid and rng.random() < VAGUE_MENTION_RATE:
        return f"the {subject} is on screen"
    return event.label

# Sign placements; disjoint so a text RoI never captures a second sign.
_TEXT_CELLS = (
    Box(0.05, 0.05, 0.30, 0.20),
    Box(0.60, 0.05, 0.90, 0.20),
    Box(0.05, 0.75, 0.35, 0.95),
    Box(0.55, 0.70, 0.90, 0.90),
)


def _span_overlap(a: Span, b: Span) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


@dataclass(frozen=True)
class _Placement:
    """An object or text together with the frames it occupies."""

    item: ObjectGT | TextGT
    span: Span


def _event_spans(rng, n: int, k: int) -> list[Span]:
    """Non-overlapping spans in order; wide enough that uniform keys land in each."""
    width = n // k
    spans = []
    for i in range(k):
        lo = i * width
        hi = min(n - 1, (i + 1) * width - 1)
        slack = max(0, (hi - lo) // 4)
        start = lo + (rng.randint(0, slack) if slack else 0)
        end = hi - (rng.randint(0, slack) if slack else 0)
        if end < start:
            start, end = lo, hi
        spans.append((start, end))
    return spans


def _random_box(rng) -> Box:
    x0 = rng.uniform(0.0, 0.65)
    y0 = rng.uniform(0.0, 0.65)
    w = rng.uniform(0.12, 0.3)
    h = rng.uniform(0.12, 0.3)
    return Box(round(x0, 3), round(y0, 3), round(min(1.0, x0 + w), 3), round(min(1.0, y0 + h), 3))


def generate_video(seed: int, profile: GenerationProfile | None = None) -> SyntheticVideo:
    """Build a deterministic synthetic video from a seed.

    Same (seed, profile) always yields an identical video.
    """
    profile = profile or GenerationProfile()
    validate_profile(profile)
    rng = derive_rng("video", seed)

    duration = round(rng.uniform(*profile.duration_range), 3)
    n = math.floor(duration * profile.fps)
    video_id = f"v{seed & 0xFFFFFFFFFFFFFFFF:016x}"

    theme = rng.choice(sorted(THEMES))
    vocab = THEMES[theme]

    k_events = min(rng.randint(*profile.n_events), len(vocab["events"]), max(1, n // 4))
    k_events = max(1, k_events)
    labels = rng.sample(list(vocab["events"]), k_events)
    events = tuple(
        EventGT(label, span, region=_random_box(rng) if rng.random() < 0.5 else None)
        for label, span in zip(labels, _event_spans(rng, n, k_events))
    )

    placements: list[_Placement] = []
    k_objects = rng.randint(*profile.n_objects)
    for idx in range(k_objects):
        noun = rng.choice(vocab["objects"])
        colored = rng.random() < profile.color_fraction or idx == 0
        label = f"{rng.choice(COLORS)} {noun}" if colored else noun
        anchor = rng.choice(events)
        pad = max(1, n // 12)
        start = max(0, anchor.span[0] - rng.randint(0, pad))
        end = min(n - 1, anchor.span[1] + rng.randint(0, pad))
        placements.append(_Placement(ObjectGT(label, idx, _random_box(rng)), (start, end)))

    k_texts = min(rng.randint(*profile.n_texts), len(vocab["texts"]), len(_TEXT_CELLS))
    contents = rng.sample(list(vocab["texts"]), k_texts) if k_texts else []
    cells = rng.sample(list(_TEXT_CELLS), k_texts) if k_texts else []
    for content, cell in zip(contents, cells):
        anchor = rng.choice(events)
        a, b = anchor.span
        # Sign occupies a sub-span of its anchor event.
        length = max(1, (b - a) // 2)
        start = a + rng.randint(0, max(0, (b - a) - length))
        placements.append(_Placement(TextGT(content, cell), (start, min(start + length, n - 1))))

    frames = []
    for i in range(n):
        objs = tuple(
            p.item for p in placements if isinstance(p.item, ObjectGT) and p.span[0] <= i <= p.span[1]
        )
        texts = tuple(
            sorted(
                (p.item for p in placements if isinstance(p.item, TextGT) and p.span[0] <= i <= p.span[1]),
                key=lambda t: t.content,
            )
        )
        frames.append(FrameRecord(i, objs, texts))

    return SyntheticVideo(video_id, duration, profile.fps, tuple(frames), events)


def video_theme(events: tuple[EventGT, ...] | list[EventGT]) -> str:
    """Dominant vocabulary pool of the given events; ties break alphabetically."""
    counts = {name: 0 for name in THEMES}
    for ev in events:
        for name, vocab in THEMES.items():
            if ev.label in vocab["events"]:
                counts[name] += 1
    return max(sorted(counts), key=lambda name: counts[name])


def objects_in_roi(video: SyntheticVideo, roi: Roi3D) -> list[ObjectGT]:
    seen: dict[int, ObjectGT] = {}
    lo, hi = roi.span
    for frame in video.frames[lo : hi + 1]:
        for obj in frame.objects:
            if obj.instance_id not in seen and obj.bbox.intersects(roi.bbox):
                seen[obj.instance_id] = obj
    return list(seen.values())


def texts_in_roi(video: SyntheticVideo, roi: Roi3D) -> list[TextGT]:
    seen: dict[tuple, TextGT] = {}
    lo, hi = roi.span
    for frame in video.frames[lo : hi + 1]:
        for text in frame.texts:
            key = (text.content, text.bbox)
            if key not in seen and text.bbox.intersects(roi.bbox):
                seen[key] = text
    return list(seen.values())


def events_in_roi(video: SyntheticVideo, roi: Roi3D) -> list[EventGT]:
    out = []
    for ev in video.events:
        if not _span_overlap(ev.span, roi.span):
            continue
        if ev.region is not None and not ev.region.intersects(roi.bbox):
            continue
        out.append(ev)
    return out


def roi_content_tokens(video: SyntheticVideo, roi: Roi3D) -> set[str]:
    """Content tokens of every ground-truth item inside the RoI."""
    tokens: set[str] = set()
    for obj in objects_in_roi(video, roi):
        tokens |= content_tokens(obj.label)
    for text in texts_in_roi(video, roi):
        tokens |= content_tokens(text.content)
    for ev in events_in_roi(video, roi):
        tokens |= content_tokens(ev.label)
    return tokens


def _noun(label: str) -> str:
    return label.split()[-1]


_COUNT_NOUN = re.compile(r"instances of (\w+)")
_ATTR_NOUN = re.compile(r"color is the (\w+)")


def question_noun(question: str) -> str | None:
    """The object noun a counting or attribute question asks about."""
    m = _COUNT_NOUN.search(question) or _ATTR_NOUN.search(question)
    return m.group(1) if m else None


def _color(label: str) -> str | None:
    head = label.split()[0]
    return head if head in COLORS else None


def _finish(rng, qa_id, video, question, options, correct, roi, kind) -> QAInstance:
    opts = list(options)
    rng.shuffle(opts)
    shuffled = tuple(opts)
    return QAInstance(
        qa_id=qa_id,
        video_id=video.video_id,
        question=question,
        options=shuffled,
        correct_index=shuffled.index(correct),
        roi=roi,
        question_kind=kind,
    )


def _other_texts(video: SyntheticVideo, exclude: str, rng) -> list[str]:
    present = {t.content for f in video.frames for t in f.texts if t.content != exclude}
    pool = sorted(present)
    for vocab in THEMES.values():
        for content in vocab["texts"]:
            if content != exclude and content not in pool:
                pool.append(content)
    return pool


def _qa_locate_text(video, rng, qa_id) -> QAInstance:
    placements: dict[tuple, tuple[TextGT, Span]] = {}
    for frame in video.frames:
        for text in frame.texts:
            key = (text.content, text.bbox)
            if key in placements:
                placements[key] = (text, (placements[key][1][0], frame.index))
            else:
                placements[key] = (text, (frame.index, frame.index))
    if not placements:
        raise Unsatisfiable("video has no sign text")
    text, span = rng.choice(sorted(placements.values(), key=lambda p: (p[1], p[0].content)))
    anchors = [ev for ev in video.events if _span_overlap(ev.span, span)]
    if not anchors:
        raise Unsatisfiable("no event overlaps the sign")
    anchor = rng.choice(anchors)
    roi = Roi3D(span, text.bbox)
    distractors = _other_texts(video, text.content, rng)
    if len(distractors) < 1:
        raise Unsatisfiable("no distractor texts available")
    options = [text.content] + distractors[:3]
    question = f"What does the sign that appears while {_event_mention(rng, anchor)} say?"
    return _finish(rng, qa_id, video, question, options, text.content, roi, "locate_text")


def _qa_count_objects(video, rng, qa_id) -> QAInstance:
    candidates = []
    for ev in video.events:
        roi = Roi3D(ev.span, FULL_FRAME)
        nouns: dict[str, int] = {}
        for obj in objects_in_roi(video, roi):
            nouns[_noun(obj.label)] = nouns.get(_noun(obj.label), 0) + 1
        for noun, count in sorted(nouns.items()):
            candidates.append((ev, noun, count))
    if not candidates:
        raise Unsatisfiable("no object co-occurs with an event")
    ev, noun, count = rng.choice(candidates)
    options = [str(count), str(count + 1), str(count + 2), str(max(0, count - 1) if count else count + 3)]
    options = list(dict.fromkeys(options))
    while len(options) < 4:
        options.append(str(count + len(options) + 1))
    question = f"How many distinct instances of {noun} appear while {_event_mention(rng, ev, avoid=noun)}?"
    return _finish(rng, qa_id, video, question, options, str(count), Roi3D(ev.span, FULL_FRAME), "count_objects")


def _qa_event_order(video, rng, qa_id) -> QAInstance:
    ordered = sorted(video.events, key=lambda e: e.span)
    if len(ordered) < 2:
        raise Unsatisfiable("fewer than two events")
    i = rng.randrange(len(ordered) - 1)
    j = rng.randrange(i + 1, len(ordered))
    first, second = ordered[i], ordered[j]
    present = {ev.label for ev in video.events}
    pool = [
        label
        for vocab in THEMES.values()
        for label in vocab["events"]
        if label not in present
    ]
    distractors = rng.sample(pool, min(2, len(pool)))
    options = [first.label, second.label] + distractors
    roi = Roi3D((first.span[0], second.span[1]), FULL_FRAME)
    mention = [first.label, second.label]
    rng.shuffle(mention)
    question = f"Which happens first: {mention[0]} or {mention[1]}?"
    return _finish(rng, qa_id, video, question, options, first.label, roi, "event_order")


def _qa_attribute(video, rng, qa_id) -> QAInstance:
    placements: dict[int, tuple[ObjectGT, Span]] = {}
    for frame in video.frames:
        for obj in frame.objects:
            if obj.instance_id in placements:
                prev, (lo, _) = placements[obj.instance_id]
                placements[obj.instance_id] = (prev, (lo, frame.index))
            else:
                placements[obj.instance_id] = (obj, (frame.index, frame.index))
    candidates = []
    for obj, span in placements.values():
        color = _color(obj.label)
        if color is None:
            continue
        for ev in video.events:
            if not _span_overlap(ev.span, span):
                continue
            # Sliver overlaps make the attribute invisible to uniform sampling.
            if min(ev.span[1], span[1]) - max(ev.span[0], span[0]) + 1 < 7:
                continue
            # Reject pairs where a same-noun object of another color shares the event.
            ambiguous = any(
                other.instance_id != obj.instance_id
                and _noun(other.label) == _noun(obj.label)
                and _color(other.label) not in (None, color)
                and _span_overlap(ev.span, other_span)
                for other, other_span in placements.values()
            )
            if not ambiguous:
                candidates.append((obj, span, ev))
    if not candidates:
        raise Unsatisfiable("no unambiguous colored object during an event")
    obj, span, ev = rng.choice(candidates)
    color = _color(obj.label)
    lo = max(ev.span[0], span[0])
    hi = min(ev.span[1], span[1])
    others = [c for c in COLORS if c != color]
    options = [color] + rng.sample(others, 3)
    noun = _noun(obj.label)
    question = f"What color is the {noun} while {_event_mention(rng, ev, avoid=noun)}?"
    return _finish(rng, qa_id, video, question, options, color, Roi3D((lo, hi), obj.bbox), "attribute_in_event")


def _qa_global_theme(video, rng, qa_id) -> QAInstance:
    theme = video_theme(video.events)
    others = [t for t in sorted(THEMES) if t != theme]
    options = [theme] + rng.sample(others, 3)
    roi = Roi3D((0, video.frame_count - 1), FULL_FRAME)
    question = "Which theme best describes the video overall?"
    return _finish(rng, qa_id, video, question, options, theme, roi, "global_theme")


_KIND_BUILDERS = {
    "locate_text": _qa_locate_text,
    "count_objects": _qa_count_objects,
    "event_order": _qa_event_order,
    "attribute_in_event": _qa_attribute,
    "global_theme": _qa_global_theme,
}


def generate_qa(
    video: SyntheticVideo, seed: int, kind: str, qa_id: str | None = None
) -> QAInstance:
    """Deterministic question for (video, seed, kind); Unsatisfiable when the GT cannot support it."""
    if kind not in _KIND_BUILDERS:
        raise ConfigurationError(f"unknown question kind {kind!r}")
    rng = derive_rng("qa", video.video_id, seed, kind)
    qa_id = qa_id or f"{video.video_id}-{kind}-{seed}"
    qa = _KIND_BUILDERS[kind](video, rng, qa_id)
    assert oracle_answer(video, qa) == qa.correct_index
    return qa


def oracle_answer(video: SyntheticVideo, qa: QAInstance) -> int:
    """Answer using only ground truth inside qa.roi plus the question text.

    This is the closure check: the RoI alone determines the answer.
    """
    kind = qa.question_kind
    if kind == "locate_text":
        texts = texts_in_roi(video, qa.roi)
        for i, opt in enumerate(qa.options):
            if any(t.content == opt for t in texts):
                return i
        raise Unsatisfiable("roi contains no option text")
    if kind == "count_objects":
        noun = question_noun(qa.question)
        count = sum(1 for obj in objects_in_roi(video, qa.roi) if _noun(obj.label) == noun)
        return qa.options.index(str(count))
    if kind == "event_order":
        events = [ev for ev in events_in_roi(video, qa.roi) if ev.label in qa.options]
        if not events:
            raise Unsatisfiable("roi contains no option event")
        first = min(events, key=lambda e: e.span)
        return qa.options.index(first.label)
    if kind == "attribute_in_event":
        noun = question_noun(qa.question)
        for obj in objects_in_roi(video, qa.roi):
            color = _color(obj.label)
            if color is not None and _noun(obj.label) == noun and color in qa.options:
                return qa.options.index(color)
        raise Unsatisfiable("roi contains no colored object for the question noun")
    if kind == "global_theme":
        theme = video_theme(events_in_roi(video, qa.roi))
        return qa.options.index(theme)
    raise ConfigurationError(f"unknown question kind {kind!r}")


DEFAULT_KIND_WEIGHTS = {
    "locate_text": 0.30,
    "attribute_in_event": 0.25,
    "count_objects": 0.15,
    "event_order": 0.15,
    "global_theme": 0.15,
}


@dataclass
class Suite:
    seed: int
    profile: GenerationProfile
    items: list[SuiteItem] = field(default_factory=list)

    def video_by_id(self, video_id: str) -> SyntheticVideo:
        for item in self.items:
            if item.video.video_id == video_id:
                return item.video
        raise KeyError(video_id)

    def qa_by_id(self, qa_id: str) -> QAInstance:
        for item in self.items:
            if item.qa.qa_id == qa_id:
                return item.qa
        raise KeyError(qa_id)


def generate_suite(
    seed: int,
    n: int,
    profile: GenerationProfile | None = None,
    kind_weights: dict[str, float] | None = None,
) -> Suite:
    profile = profile or GenerationProfile()
    validate_profile(profile)
    weights = kind_weights or DEFAULT_KIND_WEIGHTS
    if set(weights) - set(QUESTION_KINDS):
        raise ConfigurationError(f"unknown kinds in weights: {sorted(set(weights) - set(QUESTION_KINDS))}")
    kinds = sorted(weights)
    suite = Suite(seed=seed, profile=profile)
    for i in range(n):
        for attempt in range(8):
            vid_seed = derive_seed("suite-video", seed, i, attempt)
            video = generate_video(vid_seed, profile)
            rng = derive_rng("suite-kind", seed, i, attempt)
            order = rng.choices(kinds, weights=[weights[k] for k in kinds], k=1)
            fallback = [k for k in kinds if k not in order]
            rng.shuffle(fallback)
            qa = None
            for kind in order + fallback:
                try:
                    qa = generate_qa(video, vid_seed, kind, qa_id=f"q{i:05d}")
                    break
                except Unsatisfiable:
                    continue
            if qa is not None:
                suite.items.append(SuiteItem(video, qa))
                break
        else:
            raise Unsatisfiable(f"could not build a question for suite index {i}")
    return suite


# --- serialization ------------------------------------------------------------

SUITE_FORMAT = "star-suite/1"


def _box_json(box: Box | None):
    return None if box is None else box.as_list()


def _box_from(data) -> Box | None:
    return None if data is None else Box(*data)


def _video_json(video: SyntheticVideo) -> dict:
    objects: dict[int, dict] = {}
    texts: dict[tuple, dict] = {}
    for frame in video.frames:
        for obj in frame.objects:
            rec = objects.setdefault(
                obj.instance_id,
                {"label": obj.label, "instance_id": obj.instance_id, "bbox": obj.bbox.as_list(), "span": [frame.index, frame.index]},
            )
            rec["span"][1] = frame.index
        for text in frame.texts:
            key = (text.content, text.bbox)
            rec = texts.setdefault(
                key, {"content": text.content, "bbox": text.bbox.as_list(), "span": [frame.index, frame.index]}
            )
            rec["span"][1] = frame.index
    return {
        "video_id": video.video_id,
        "duration_s": video.duration_s,
        "fps": video.fps,
        "events": [
            {"label": ev.label, "span": list(ev.span), "region": _box_json(ev.region)}
            for ev in video.events
        ],
        "objects": [objects[k] for k in sorted(objects)],
        "texts": [texts[k] for k in sorted(texts)],
    }


def _video_from(data: dict) -> SyntheticVideo:
    n = math.floor(data["duration_s"] * data["fps"])
    events = tuple(
        EventGT(ev["label"], tuple(ev["span"]), _box_from(ev.get("region")))
        for ev in data["events"]
    )
    object_rows = [
        (ObjectGT(o["label"], o["instance_id"], Box(*o["bbox"])), tuple(o["span"]))
        for o in data["objects"]
    ]
    text_rows = [(TextGT(t["content"], Box(*t["bbox"])), tuple(t["span"])) for t in data["texts"]]
    frames = []
    for i in range(n):
        objs = tuple(obj for obj, span in object_rows if span[0] <= i <= span[1])
        txts = tuple(
            sorted(
                (txt for txt, span in text_rows if span[0] <= i <= span[1]),
                key=lambda t: t.content,
            )
        )
        frames.append(FrameRecord(i, objs, txts))
    return SyntheticVideo(data["video_id"], data["duration_s"], data["fps"], tuple(frames), events)


def _qa_json(qa: QAInstance) -> dict:
    return {
        "qa_id": qa.qa_id,
        "video_id": qa.video_id,
        "question": qa.question,
        "options": list(qa.options),
        "correct_index": qa.correct_index,
        "roi": {"span": list(qa.roi.span), "bbox": qa.roi.bbox.as_list()},
        "question_kind": qa.question_kind,
    }


def _qa_from(data: dict) -> QAInstance:
    return QAInstance(
        qa_id=data["qa_id"],
        video_id=data["video_id"],
        question=data["question"],
        options=tuple(data["options"]),
        correct_index=data["correct_index"],
        roi=Roi3D(tuple(data["roi"]["span"]), Box(*data["roi"]["bbox"])),
        question_kind=data["question_kind"],
    )


def save_suite(suite: Suite, path: str | Path) -> None:
    doc = {
        "format": SUITE_FORMAT,
        "seed": suite.seed,
        "profile": asdict(suite.profile),
        "items": [
            {"video": _video_json(item.video), "qa": _qa_json(item.qa)} for item in suite.items
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_suite(path: str | Path) -> Suite:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != SUITE_FORMAT:
        raise ConfigurationError(f"unsupported suite format {doc.get('format')!r}")
    prof = doc["profile"]
    profile = GenerationProfile(
        duration_range=tuple(prof["duration_range"]),
        fps=prof["fps"],
        n_objects=tuple(prof["n_objects"]),
        n_events=tuple(prof["n_events"]),
        n_texts=tuple(prof["n_texts"]),
        color_fraction=prof["color_fraction"],
    )
    suite = Suite(seed=doc["seed"], profile=profile)
    for item in doc["items"]:
        suite.items.append(SuiteItem(_video_from(item["video"]), _qa_from(item["qa"])))
    return suite
