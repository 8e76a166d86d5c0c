"""Scene-change keyframe extraction and greedy diversity selection.

Both operations expect unit-normalized embeddings and measure similarity as
the clamped float64 dot product of two rows, which is cosine similarity on
that input. The extraction scan is intentionally written pair-by-pair so the
arithmetic matches a literal transcription of the procedure step for step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MathDomainError, ValidationError
from .features import MIN_NORM, FrameFeatureSet


@dataclass(frozen=True)
class KeyframeParams:
    """Thresholds for the bidirectional scan.

    ``scene_threshold`` gates similarity to the previous keyframe (a drop
    below it marks a candidate change); ``diversity_threshold`` gates the
    forward scan that confirms the change is not a transient.
    """

    scene_threshold: float = 0.85
    diversity_threshold: float = 0.80

    def __post_init__(self) -> None:
        for name in ("scene_threshold", "diversity_threshold"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value}")


def _row_sim(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def extract_keyframes(
    features: FrameFeatureSet,
    params: KeyframeParams = KeyframeParams(),
    lookahead: int | None = None,
) -> list[int]:
    """Bidirectional similarity scan for scene-change keyframes.

    Frame 0 is always selected. Frame i joins the selection when its
    similarity to the previous keyframe falls below ``scene_threshold`` AND
    some future frame (within ``lookahead`` frames when given, otherwise the
    rest of the video) is dissimilar below ``diversity_threshold``. After the
    scan, the last frame is appended if it is still dissimilar to the final
    keyframe. Returns strictly increasing indices starting at 0.
    """
    if not features.normalized:
        raise ValidationError("extract_keyframes requires unit-normalized features")
    if lookahead is not None and lookahead < 1:
        raise ValidationError(f"lookahead must be >= 1, got {lookahead}")
    t1 = params.scene_threshold
    t2 = params.diversity_threshold
    rows = features.vectors.astype(np.float64)
    n = rows.shape[0]
    selected = [0]
    prev = rows[0]
    for i in range(1, n):
        curr = rows[i]
        if _row_sim(curr, prev) < t1:
            stop = n if lookahead is None else min(n, i + 1 + lookahead)
            for j in range(i + 1, stop):
                if _row_sim(curr, rows[j]) < t2:
                    selected.append(i)
                    prev = curr
                    break
    if _row_sim(rows[n - 1], prev) < t1 and selected[-1] != n - 1:
        selected.append(n - 1)
    return selected


def _unit_rows(features: FrameFeatureSet, indices: list[int]) -> np.ndarray:
    rows = features.vectors[indices].astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    bad = np.nonzero(norms <= MIN_NORM)[0]
    if bad.size:
        raise MathDomainError(
            f"frame {indices[int(bad[0])]} has near-zero norm, cosine undefined"
        )
    return rows / norms[:, None]


def greedy_diverse_order(
    features: FrameFeatureSet, candidate_indices: list[int], k: int
) -> list[int]:
    """Farthest-point selection, returned in the order frames were chosen.

    Seeds with the earliest candidate, then repeatedly adds the candidate
    whose minimum cosine distance (1 - similarity) to the chosen set is
    largest, breaking ties toward the smaller frame index.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    cands = sorted(set(candidate_indices))
    if not cands:
        raise ValidationError("candidate set is empty")
    if cands[0] < 0 or cands[-1] >= features.frame_count:
        raise ValidationError(
            f"candidates must lie in [0, {features.frame_count}), got "
            f"[{cands[0]}, {cands[-1]}]"
        )
    if k >= len(cands):
        return list(cands)
    unit = _unit_rows(features, cands)
    chosen = [0]  # positions into cands
    min_dist = 1.0 - np.clip(unit @ unit[0], -1.0, 1.0)
    while len(chosen) < k:
        best_pos = -1
        best_dist = -np.inf
        for pos in range(len(cands)):
            if min_dist[pos] > best_dist and pos not in chosen:
                best_pos = pos
                best_dist = float(min_dist[pos])
        chosen.append(best_pos)
        min_dist = np.minimum(min_dist, 1.0 - np.clip(unit @ unit[best_pos], -1.0, 1.0))
    return [cands[pos] for pos in chosen]


def select_diverse(
    features: FrameFeatureSet, candidate_indices: list[int], k: int
) -> list[int]:
    """Greedy farthest-point subset of the candidates, sorted ascending."""
    return sorted(greedy_diverse_order(features, candidate_indices, k))
