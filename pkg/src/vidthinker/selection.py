"""Inference-time frame selection: score frames, pick top-k or uniform-k.

The remote scorer speaks a one-endpoint protocol: POST
``{"video_id": ..., "question": ..., "vectors": [[...], ...]}`` and read back
``{"scores": [...]}`` with exactly one score per frame. Grid feature sets are
anchor-pooled locally before transmission so the wire carries one vector per
frame either way.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .errors import ProtocolError, TransportError, ValidationError
from .features import FrameFeatureSet, anchor_vectors, cosine_sim
from .sampling import uniform_positions

POLICY_TOPK = "topk"
POLICY_UNIFORM = "uniform"


@dataclass(frozen=True)
class SelectionResult:
    video_id: str
    policy: str
    k: int
    frame_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.policy not in (POLICY_TOPK, POLICY_UNIFORM):
            raise ValidationError(f"unknown policy {self.policy!r}")
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "frame_indices", tuple(self.frame_indices))

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "policy": self.policy,
            "k": self.k,
            "frame_indices": list(self.frame_indices),
        }


def _check_scores(scores: Sequence[float]) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(f"scores must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("scores contain non-finite values")
    return arr


def select_topk(scores: Sequence[float], k: int, video_id: str = "") -> SelectionResult:
    """The k highest-scoring frames, ties to the smaller index, sorted ascending."""
    arr = _check_scores(scores)
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    n = arr.size
    take = min(k, n)
    # lexsort: primary key last -> sort by descending score, then by index
    order = np.lexsort((np.arange(n), -arr))[:take]
    return SelectionResult(video_id, POLICY_TOPK, k, tuple(sorted(int(i) for i in order)))


def select_uniform(frame_count: int, k: int, video_id: str = "") -> SelectionResult:
    """Evenly spread frames: index_j = floor((j + 0.5) * frame_count / k)."""
    if frame_count < 1:
        raise ValidationError(f"frame_count must be >= 1, got {frame_count}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if k >= frame_count:
        return SelectionResult(video_id, POLICY_UNIFORM, k, tuple(range(frame_count)))
    used: set[int] = set()
    for idx in uniform_positions(frame_count, k):
        if idx in used:  # collisions get the nearest unused index
            for delta in range(1, frame_count):
                for cand in (idx + delta, idx - delta):
                    if 0 <= cand < frame_count and cand not in used:
                        idx = cand
                        break
                else:
                    continue
                break
        used.add(idx)
    return SelectionResult(video_id, POLICY_UNIFORM, k, tuple(sorted(used)))


def score_by_query_similarity(
    features: FrameFeatureSet, query_vector: np.ndarray
) -> np.ndarray:
    """Cosine similarity of every frame against one query embedding."""
    query = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    if query.shape[0] != features.dim:
        raise ValidationError(
            f"query dim {query.shape[0]} does not match features dim {features.dim}"
        )
    return np.array(
        [cosine_sim(features.vectors[i], query) for i in range(features.frame_count)]
    )


class ScorerBackend(Protocol):
    def score(self, video_id: str, question: str, vectors: list[list[float]]) -> list[float]: ...


class MockScorer:
    """Echoes precomputed score vectors, keyed by video id."""

    def __init__(self, scores_by_video: dict[str, Sequence[float]]):
        self._scores = {k: [float(x) for x in v] for k, v in scores_by_video.items()}

    def score(self, video_id: str, question: str, vectors: list[list[float]]) -> list[float]:
        if video_id not in self._scores:
            raise ProtocolError(f"no pinned scores for video {video_id!r}")
        return list(self._scores[video_id])


class HttpScorer:
    """Scorer speaking the wire protocol over HTTP, with bounded retries."""

    def __init__(
        self,
        url: str,
        timeout_s: float = 30.0,
        retries: int = 3,
        backoff_s: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        if not url:
            raise ValidationError("scorer url must be non-empty")
        self._url = url
        self._retries = retries
        self._backoff_s = backoff_s
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def score(self, video_id: str, question: str, vectors: list[list[float]]) -> list[float]:
        payload = {"video_id": video_id, "question": question, "vectors": vectors}
        attempt = 0
        while True:
            try:
                response = self._client.post(self._url, json=payload)
                if response.status_code != 200:
                    raise TransportError(f"POST {self._url} returned {response.status_code}")
                break
            except (httpx.HTTPError, TransportError) as exc:
                if attempt >= self._retries:
                    if isinstance(exc, TransportError):
                        raise
                    raise TransportError(f"POST {self._url} failed: {exc}") from exc
                time.sleep(self._backoff_s * (2**attempt))
                attempt += 1
        try:
            body = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProtocolError(f"non-JSON response from {self._url}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("scores"), list):
            raise ProtocolError(f"response from {self._url} lacks a scores list")
        return body["scores"]

    def close(self) -> None:
        self._client.close()


def score_frames_remote(
    features: FrameFeatureSet, question: str, scorer: ScorerBackend
) -> np.ndarray:
    """Score every frame through a scorer backend.

    Grid feature sets are anchor-pooled to one vector per frame before
    transmission. A response whose length disagrees with the frame count is a
    protocol error.
    """
    if features.grid_shape is not None:
        per_frame = anchor_vectors(features)
    else:
        per_frame = features.vectors.astype(np.float64)
    vectors = [[float(x) for x in row] for row in per_frame]
    scores = scorer.score(features.video_id, question, vectors)
    if len(scores) != features.frame_count:
        raise ProtocolError(
            f"scorer returned {len(scores)} scores for {features.frame_count} frames"
        )
    arr = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ProtocolError("scorer returned non-finite scores")
    return arr
