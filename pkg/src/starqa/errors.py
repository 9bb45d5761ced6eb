"""Exception types shared across the package."""

from __future__ import annotations


class StarError(Exception):
    """Base class for package errors."""


class ConfigurationError(StarError):
    """A profile, strategy config, or CLI config is malformed."""


class Unsatisfiable(StarError):
    """No ground truth in the video is compatible with the requested question kind."""


class DuplicateTool(StarError):
    """A tool card with this name is already registered."""


class InvalidCard(StarError):
    """A tool card fails validation."""


class InvalidCardFile(StarError):
    """A card file is malformed; message names the offending entry and field."""


class ToolNotFound(StarError):
    """No tool card or backend with the requested name."""


class EmptyVideo(StarError):
    """The video has no frames to sample."""


class IndexOutOfRange(StarError):
    """A frame index is outside [0, frame_count - 1]."""


class WouldEmptyDictionary(StarError):
    """A temporal update would remove every visible frame."""


class FrameNotVisible(StarError):
    """Annotation target frame is not a key of the dictionary."""


class EventNotFound(StarError):
    """No ground-truth event matches the query."""


class InvalidRegion(StarError):
    """A bounding box is degenerate or outside the unit square."""


class BackendError(StarError):
    """A planner backend failed to produce a usable response."""


class AnswerParseError(StarError):
    """An answer string could not be mapped onto the option list."""


class ProtocolViolation(StarError):
    """A planner or tool server response violates its contract."""


class EpisodeAborted(StarError):
    """An episode could not run to completion."""


class TraceParseError(StarError):
    """A trace file line is malformed."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ToolTimeout(StarError):
    """A remote tool call exceeded its deadline."""


class ToolServerError(StarError):
    """The tool server reported an internal failure."""


class HandshakeError(StarError):
    """A served tool card does not match the local card of the same name."""
