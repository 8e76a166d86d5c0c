"""Instruction-aware frame sampling strategies.

Every sampler returns exactly ``min(budget, frame_count)`` sorted unique frame
indices. The strategies differ in where those frames come from:

* semantic: diversity-first inside the relevant clips,
* motion: fixed-rate strides inside the relevant clips,
* hybrid: half motion, half semantic, merged,
* non-clues: diversity over the whole video with edge-decile coverage.

Deficits are always backfilled in the same order: remaining relevant-clip
frames first, then the rest of the video.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .features import FrameFeatureSet
from .keyframes import greedy_diverse_order, select_diverse
from .timeline import Clip, InstructionType, VideoTimeline


@dataclass(frozen=True)
class SamplePlan:
    """What to sample: type, budget, rate, and the clips evidence lives in."""

    instruction_type: InstructionType
    timeline: VideoTimeline
    relevant_clips: tuple[Clip, ...] = ()
    budget: int = 32
    fixed_rate_fps: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "relevant_clips", tuple(self.relevant_clips))
        if self.budget < 1:
            raise ValidationError(f"budget must be >= 1, got {self.budget}")
        if not (math.isfinite(self.fixed_rate_fps) and self.fixed_rate_fps > 0):
            raise ValidationError(f"fixed_rate_fps must be positive, got {self.fixed_rate_fps}")
        if not self.relevant_clips and self.instruction_type is not InstructionType.NON_CLUES:
            raise ValidationError(
                f"{self.instruction_type.value} plans need at least one relevant clip"
            )
        for clip in self.relevant_clips:
            if clip.end_frame_exclusive > self.timeline.frame_count:
                raise ValidationError(
                    f"clip {clip.index} overruns the {self.timeline.frame_count}-frame timeline"
                )


def rate_stride(sample_fps: float, fixed_rate_fps: float) -> int:
    """Frame stride realizing ``fixed_rate_fps`` on a ``sample_fps`` grid."""
    return max(1, int(math.floor(sample_fps / fixed_rate_fps + 0.5)))


def uniform_positions(n: int, k: int) -> list[int]:
    """Centers of k equal buckets over n slots: floor((j + 0.5) * n / k)."""
    if k < 1 or n < 1:
        raise ValidationError(f"need n >= 1 and k >= 1, got n={n} k={k}")
    return [math.floor((j + 0.5) * n / k) for j in range(k)]


def subsample_uniform(items: Sequence[int], k: int) -> list[int]:
    """Thin an ordered list down to k entries at uniform bucket centers."""
    if k >= len(items):
        return list(items)
    return [items[pos] for pos in uniform_positions(len(items), k)]


def _clip_frames(clips: Sequence[Clip]) -> list[int]:
    frames: list[int] = []
    for clip in clips:
        frames.extend(clip.frames())
    return frames


def _stride_walk(clips: Sequence[Clip], stride: int) -> list[int]:
    picks: list[int] = []
    for clip in clips:
        picks.extend(range(clip.start_frame, clip.end_frame_exclusive, stride))
    return picks


def _uniform_backfill(chosen: set[int], candidates: Sequence[int], need: int) -> None:
    """Add up to ``need`` unchosen candidates at uniform bucket centers."""
    rest = [f for f in candidates if f not in chosen]
    if not rest or need <= 0:
        return
    for pos in uniform_positions(len(rest), min(need, len(rest))):
        chosen.add(rest[pos])


def _diverse_backfill(
    chosen: set[int], candidates: Sequence[int], need: int, features: FrameFeatureSet
) -> None:
    rest = sorted(set(candidates) - chosen)
    if not rest or need <= 0:
        return
    chosen.update(select_diverse(features, rest, min(need, len(rest))))


def sample_semantic(
    plan: SamplePlan, features: FrameFeatureSet, pool: Sequence[int] | None = None
) -> list[int]:
    """Diverse frames from the candidate pool, globally backfilled on deficit."""
    n = plan.timeline.frame_count
    k = min(plan.budget, n)
    candidates = sorted(set(pool)) if pool is not None else _clip_frames(plan.relevant_clips)
    if not candidates:
        raise ValidationError("semantic sampling needs a non-empty candidate pool")
    chosen = set(select_diverse(features, list(candidates), k))
    if len(chosen) < k:
        _diverse_backfill(chosen, _clip_frames(plan.relevant_clips), k - len(chosen), features)
    if len(chosen) < k:
        _diverse_backfill(chosen, range(n), k - len(chosen), features)
    return sorted(chosen)


def sample_motion(plan: SamplePlan, pool: Sequence[int] | None = None) -> list[int]:
    """Fixed-rate frames inside the relevant clips.

    Overshoot is thinned with uniform bucket centers. Deficits widen the
    stride pass by halving the stride, then fall back to uniform backfill
    from the remaining clip frames and finally the whole video. When an
    explicit pool is given (already rate-limited by the caller) the pool
    itself is the stride pass.
    """
    timeline = plan.timeline
    n = timeline.frame_count
    k = min(plan.budget, n)
    if pool is not None:
        taken = sorted(set(pool))
        if not taken:
            raise ValidationError("motion sampling needs a non-empty candidate pool")
    else:
        stride = rate_stride(timeline.sample_fps, plan.fixed_rate_fps)
        taken = _stride_walk(plan.relevant_clips, stride)
        if len(taken) < k:
            chosen = set(taken)
            while len(chosen) < k and stride > 1:
                stride = max(1, stride // 2)
                chosen.update(_stride_walk(plan.relevant_clips, stride))
            taken = sorted(chosen)
    if len(taken) > k:
        return subsample_uniform(taken, k)
    chosen = set(taken)
    if len(chosen) < k:
        _uniform_backfill(chosen, _clip_frames(plan.relevant_clips), k - len(chosen))
    if len(chosen) < k:
        _uniform_backfill(chosen, range(n), k - len(chosen))
    return sorted(chosen)


def sample_hybrid(
    plan: SamplePlan, features: FrameFeatureSet, pool: Sequence[int] | None = None
) -> list[int]:
    """Motion picks for ceil(budget/2) frames merged with semantic picks."""
    n = plan.timeline.frame_count
    k = min(plan.budget, n)
    k_motion = (plan.budget + 1) // 2
    k_semantic = plan.budget - k_motion
    chosen = set(sample_motion(replace(plan, budget=k_motion), pool))
    if k_semantic >= 1:
        chosen.update(sample_semantic(replace(plan, budget=k_semantic), features, pool))
    if len(chosen) > k:
        return subsample_uniform(sorted(chosen), k)
    if len(chosen) < k:
        _diverse_backfill(chosen, _clip_frames(plan.relevant_clips), k - len(chosen), features)
    if len(chosen) < k:
        _diverse_backfill(chosen, range(n), k - len(chosen), features)
    return sorted(chosen)


def _decile_bounds(n: int) -> tuple[int, int]:
    """(first_decile_end, last_decile_start); both bands are always non-empty."""
    first_end = max(1, math.ceil(n / 10))
    last_start = min(n - 1, math.floor(9 * n / 10))
    return first_end, last_start


def sample_nonclues(plan: SamplePlan, features: FrameFeatureSet) -> list[int]:
    """Diverse coverage of the whole video.

    The greedy order seeds at frame 0, so the first decile is always covered.
    With a budget of three or more, the last pick is traded for the best
    last-decile frame whenever that band would otherwise be missed.
    """
    n = plan.timeline.frame_count
    k = min(plan.budget, n)
    if k >= n:
        return list(range(n))
    order = greedy_diverse_order(features, list(range(n)), k)
    if k >= 3:
        _, last_start = _decile_bounds(n)
        picks = set(order)
        if not any(f >= last_start for f in picks):
            keep = picks - {order[-1]}
            order[-1] = _best_decile_frame(features, range(last_start, n), keep)
    return sorted(set(order))


def _best_decile_frame(
    features: FrameFeatureSet, band: Sequence[int], chosen: set[int]
) -> int:
    """Band frame farthest (min cosine distance) from the chosen set."""
    unit = features.vectors.astype(np.float64)
    # zero rows were already rejected by the greedy pass over all frames
    norms = np.linalg.norm(unit, axis=1)
    unit = unit / norms[:, None]
    chosen_rows = unit[sorted(chosen)]
    best_frame = -1
    best_dist = -np.inf
    for frame in band:
        dist = float(np.min(1.0 - np.clip(chosen_rows @ unit[frame], -1.0, 1.0)))
        if dist > best_dist:
            best_frame = frame
            best_dist = dist
    return best_frame


def sample_frames(
    plan: SamplePlan, features: FrameFeatureSet, pool: Sequence[int] | None = None
) -> list[int]:
    """Dispatch to the sampler for the plan's instruction type."""
    if plan.instruction_type is InstructionType.SEMANTIC_ONLY:
        return sample_semantic(plan, features, pool)
    if plan.instruction_type is InstructionType.MOTION_ONLY:
        return sample_motion(plan, pool)
    if plan.instruction_type is InstructionType.SEMANTIC_MOTION:
        return sample_hybrid(plan, features, pool)
    return sample_nonclues(plan, features)
