from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from vidthinker.features import FrameFeatureSet

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def unit_features(
    video_id: str, rows: np.ndarray | list, normalized: bool = True
) -> FrameFeatureSet:
    """Build a feature set from float rows, unit-normalizing when asked."""
    arr = np.asarray(rows, dtype=np.float64)
    if normalized:
        arr = arr / np.linalg.norm(arr, axis=1, keepdims=True)
    return FrameFeatureSet(video_id, arr.astype(np.float32), normalized=normalized)


def cluster_features(
    video_id: str,
    frame_count: int,
    n_clusters: int,
    dim: int,
    seed: int,
    noise: float = 0.05,
) -> FrameFeatureSet:
    """Frames split into contiguous same-sized clusters around orthogonal centers."""
    rng = np.random.default_rng(seed)
    centers = np.eye(dim, dtype=np.float64)[:n_clusters]
    scene = np.minimum(np.arange(frame_count) * n_clusters // frame_count, n_clusters - 1)
    rows = centers[scene] + noise * rng.standard_normal((frame_count, dim))
    return unit_features(video_id, rows)
