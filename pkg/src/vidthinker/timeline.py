"""Video timeline arithmetic, uniform clip segmentation, and QA records."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import RangeError, ValidationError

# Frame boundaries land exactly on integers for common rates; the epsilon only
# absorbs float noise from the multiplication, it never moves a true boundary.
_BOUNDARY_EPS = 1e-9


def _frame_floor(value: float) -> int:
    return int(math.floor(value + _BOUNDARY_EPS))


class InstructionType(str, Enum):
    """How a question constrains which frames carry the answer."""

    SEMANTIC_ONLY = "semantic_only"
    MOTION_ONLY = "motion_only"
    SEMANTIC_MOTION = "semantic_motion"
    NON_CLUES = "non_clues"


@dataclass(frozen=True)
class VideoTimeline:
    """Uniformly sampled frame grid over a video.

    ``frame_count`` defaults to ``floor(duration_s * sample_fps)``; an explicit
    count is accepted as long as its last timestamp still falls within one
    frame period of the duration.
    """

    video_id: str
    duration_s: float
    sample_fps: float
    frame_count: int = 0

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValidationError("video_id must be non-empty")
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise ValidationError(f"duration_s must be positive, got {self.duration_s}")
        if not (math.isfinite(self.sample_fps) and self.sample_fps > 0):
            raise ValidationError(f"sample_fps must be positive, got {self.sample_fps}")
        if self.frame_count == 0:
            derived = _frame_floor(self.duration_s * self.sample_fps)
            if derived < 1:
                raise ValidationError(
                    f"duration {self.duration_s}s at {self.sample_fps} fps yields no frames"
                )
            object.__setattr__(self, "frame_count", derived)
        if self.frame_count < 1:
            raise ValidationError("frame_count must be >= 1")
        # last timestamp must stay within one frame period of the duration
        if (self.frame_count - 1) / self.sample_fps >= self.duration_s + 1.0 / self.sample_fps:
            raise ValidationError(
                f"frame_count {self.frame_count} overruns a {self.duration_s}s timeline"
            )

    def timestamp(self, frame_index: int) -> float:
        return time_of_frame(self, frame_index)


@dataclass(frozen=True)
class Clip:
    """Half-open slice of a timeline: frames [start_frame, end_frame_exclusive)."""

    index: int
    start_frame: int
    end_frame_exclusive: int
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValidationError("clip index must be >= 0")
        if self.start_frame < 0 or self.end_frame_exclusive <= self.start_frame:
            raise ValidationError(
                f"clip frames [{self.start_frame}, {self.end_frame_exclusive}) are empty"
            )
        if self.end_s <= self.start_s:
            raise ValidationError(f"clip seconds [{self.start_s}, {self.end_s}) are empty")

    @property
    def num_frames(self) -> int:
        return self.end_frame_exclusive - self.start_frame

    def frames(self) -> range:
        return range(self.start_frame, self.end_frame_exclusive)


@dataclass(frozen=True)
class QAPair:
    """One question/answer instruction, optionally with answer options."""

    qa_id: str
    question: str
    answer: str
    options: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.qa_id:
            raise ValidationError("qa_id must be non-empty")
        if not self.question.strip():
            raise ValidationError("question must be non-empty")
        if not self.answer.strip():
            raise ValidationError("answer must be non-empty")
        if self.options is not None:
            object.__setattr__(self, "options", tuple(self.options))


def frame_of_time(timeline: VideoTimeline, t_s: float) -> int:
    """Map a timestamp to its frame index (floor semantics, clamped)."""
    if not math.isfinite(t_s) or t_s < 0 or t_s > timeline.duration_s:
        raise RangeError(f"timestamp {t_s} outside [0, {timeline.duration_s}]")
    idx = _frame_floor(t_s * timeline.sample_fps)
    return min(max(idx, 0), timeline.frame_count - 1)


def time_of_frame(timeline: VideoTimeline, frame_index: int) -> float:
    """Map a frame index to the timestamp it was sampled at."""
    if not 0 <= frame_index < timeline.frame_count:
        raise RangeError(
            f"frame {frame_index} outside [0, {timeline.frame_count}) for {timeline.video_id}"
        )
    return frame_index / timeline.sample_fps


def segment_uniform(timeline: VideoTimeline, clip_seconds: float = 5.0) -> list[Clip]:
    """Tile the timeline into fixed-length clips.

    Clip i nominally spans ``[i * clip_seconds, (i + 1) * clip_seconds)`` with
    the last clip capped at the video duration. Boundaries are converted to
    frames with floor semantics. A boundary that would produce an empty clip
    is dropped, so the trailing remainder merges into its predecessor and the
    clips always tile ``[0, frame_count)`` exactly.
    """
    if not (math.isfinite(clip_seconds) and clip_seconds > 0):
        raise ValidationError(f"clip_seconds must be positive, got {clip_seconds}")
    nominal = math.ceil(timeline.duration_s / clip_seconds)
    # boundary pairs (seconds, frame); keep only strictly increasing frames
    pairs: list[tuple[float, int]] = [(0.0, 0)]
    for i in range(1, nominal):
        t = i * clip_seconds
        f = min(_frame_floor(t * timeline.sample_fps), timeline.frame_count)
        if f > pairs[-1][1] and f < timeline.frame_count:
            pairs.append((t, f))
    pairs.append((timeline.duration_s, timeline.frame_count))
    clips = []
    for idx in range(len(pairs) - 1):
        start_s, start_f = pairs[idx]
        end_s, end_f = pairs[idx + 1]
        clips.append(Clip(idx, start_f, end_f, start_s, end_s))
    return clips
