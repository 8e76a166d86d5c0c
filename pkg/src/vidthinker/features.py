"""Per-frame embeddings, the VITG container format, and similarity math.

VITG layout (all integers little-endian):

    magic  b"VITG"
    u32    version (currently 1)
    u32    frame_count N
    u32    dim d
    [u32   grid rows, u32 grid cols]   -- only in grid files
    u8     normalized flag (0 or 1)
    7x u8  reserved, must be zero
    N*d    little-endian float32, frame-major

A grid file stores one feature vector per patch; ``dim`` is the flattened
``rows * cols * channel`` width and the payload layout is unchanged. Plain and
grid files differ by exactly eight header bytes, which is how the loader
tells them apart.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    MathDomainError,
    ValidationError,
    VitgFormatError,
    VitgMagicError,
    VitgNonFiniteError,
    VitgTruncatedError,
    VitgVersionError,
)

MAGIC = b"VITG"
VERSION = 1
UNIT_NORM_ATOL = 1e-5
MIN_NORM = 1e-12
_PLAIN_HEADER = 24
_GRID_HEADER = 32


@dataclass(frozen=True)
class FrameFeatureSet:
    """Immutable (frame_count, dim) float32 matrix of frame embeddings.

    When ``grid_shape`` is set each row is a flattened patch grid and
    ``dim = rows * cols * channel``.
    """

    video_id: str
    vectors: np.ndarray
    normalized: bool = False
    grid_shape: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"vectors must be non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("vectors contain non-finite components")
        if self.grid_shape is not None:
            rows, cols = self.grid_shape
            if rows < 1 or cols < 1:
                raise ValidationError(f"grid shape {self.grid_shape} must be positive")
            if arr.shape[1] % (rows * cols) != 0:
                raise ValidationError(
                    f"dim {arr.shape[1]} is not divisible by {rows}x{cols} patches"
                )
            object.__setattr__(self, "grid_shape", (int(rows), int(cols)))
        if self.normalized:
            norms = np.linalg.norm(arr.astype(np.float64), axis=1)
            bad = np.nonzero(np.abs(norms - 1.0) > UNIT_NORM_ATOL)[0]
            if bad.size:
                raise ValidationError(
                    f"row {int(bad[0])} has norm {norms[bad[0]]:.6f}, expected 1 "
                    f"within {UNIT_NORM_ATOL}"
                )
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)

    @property
    def frame_count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class GridFeature:
    """Patch-grid feature for a single frame: (rows*cols, channel) matrix."""

    rows: int
    cols: int
    patch_vectors: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.patch_vectors, dtype=np.float32)
        if self.rows < 1 or self.cols < 1:
            raise ValidationError("grid dimensions must be positive")
        if arr.ndim != 2 or arr.shape[0] != self.rows * self.cols:
            raise ValidationError(
                f"expected {self.rows * self.cols} patch rows, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError("patch vectors contain non-finite components")
        arr.setflags(write=False)
        object.__setattr__(self, "patch_vectors", arr)


def save_features(features: FrameFeatureSet, path: str | Path) -> None:
    """Write a feature set in the VITG container format (bit-exact)."""
    parts = [MAGIC, struct.pack("<III", VERSION, features.frame_count, features.dim)]
    if features.grid_shape is not None:
        parts.append(struct.pack("<II", *features.grid_shape))
    parts.append(struct.pack("<B", 1 if features.normalized else 0))
    parts.append(b"\x00" * 7)
    parts.append(features.vectors.astype("<f4", copy=False).tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def load_features(path: str | Path, video_id: str | None = None) -> FrameFeatureSet:
    """Read a VITG file; the grid variant is detected from the header length."""
    data = Path(path).read_bytes()
    if len(data) >= 4 and data[:4] != MAGIC:
        raise VitgMagicError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < _PLAIN_HEADER:
        raise VitgTruncatedError(f"{path}: {len(data)} bytes is shorter than any header")
    version, frame_count, dim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise VitgVersionError(f"{path}: unsupported version {version}")
    if frame_count < 1 or dim < 1:
        raise VitgFormatError(f"{path}: invalid frame_count={frame_count} dim={dim}")
    payload_len = 4 * frame_count * dim
    if len(data) == _PLAIN_HEADER + payload_len:
        grid_shape = None
        flag_off = 16
    elif len(data) == _GRID_HEADER + payload_len:
        rows, cols = struct.unpack_from("<II", data, 16)
        if rows < 1 or cols < 1 or dim % (rows * cols) != 0:
            raise VitgFormatError(f"{path}: grid {rows}x{cols} does not divide dim {dim}")
        grid_shape = (rows, cols)
        flag_off = 24
    elif len(data) < _PLAIN_HEADER + payload_len:
        raise VitgTruncatedError(
            f"{path}: header claims {payload_len} payload bytes, "
            f"only {len(data) - _PLAIN_HEADER} present"
        )
    else:
        raise VitgFormatError(f"{path}: {len(data)} bytes does not match any layout")
    flag = data[flag_off]
    if flag not in (0, 1):
        raise VitgFormatError(f"{path}: normalized flag must be 0 or 1, got {flag}")
    if any(data[flag_off + 1 : flag_off + 8]):
        raise VitgFormatError(f"{path}: reserved header bytes must be zero")
    raw = np.frombuffer(data, dtype="<f4", count=frame_count * dim, offset=flag_off + 8)
    if not np.all(np.isfinite(raw)):
        raise VitgNonFiniteError(f"{path}: payload contains non-finite values")
    vectors = raw.reshape(frame_count, dim)
    return FrameFeatureSet(
        video_id=video_id if video_id is not None else Path(path).stem,
        vectors=vectors,
        normalized=bool(flag),
        grid_shape=grid_shape,
    )


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity with float64 accumulation, clamped to [-1, 1]."""
    a = np.asarray(u, dtype=np.float64).reshape(-1)
    b = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise MathDomainError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na <= MIN_NORM or nb <= MIN_NORM:
        raise MathDomainError(f"near-zero norm ({na:.3e}, {nb:.3e})")
    return float(np.clip(float(np.dot(a, b)) / (na * nb), -1.0, 1.0))


def normalize(features: FrameFeatureSet) -> FrameFeatureSet:
    """Return a copy with unit-norm rows; rejects rows with near-zero norm."""
    rows = features.vectors.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    bad = np.nonzero(norms <= MIN_NORM)[0]
    if bad.size:
        raise MathDomainError(f"row {int(bad[0])} has near-zero norm {norms[bad[0]]:.3e}")
    unit = (rows / norms[:, None]).astype(np.float32)
    return FrameFeatureSet(
        video_id=features.video_id,
        vectors=unit,
        normalized=True,
        grid_shape=features.grid_shape,
    )


def frame_grid(features: FrameFeatureSet, frame_index: int) -> GridFeature:
    """View one frame of a grid feature set as its (patches, channel) matrix."""
    if features.grid_shape is None:
        raise ValidationError(f"{features.video_id} carries no grid shape")
    if not 0 <= frame_index < features.frame_count:
        raise ValidationError(f"frame {frame_index} outside [0, {features.frame_count})")
    rows, cols = features.grid_shape
    patches = rows * cols
    channel = features.dim // patches
    return GridFeature(rows, cols, features.vectors[frame_index].reshape(patches, channel))


def anchor_pool(grid: GridFeature) -> np.ndarray:
    """Pool a patch grid to one anchor vector: the componentwise patch mean."""
    return grid.patch_vectors.astype(np.float64).mean(axis=0)


def anchor_vectors(features: FrameFeatureSet) -> np.ndarray:
    """Anchor-pool every frame of a grid feature set into an (N, channel) matrix."""
    if features.grid_shape is None:
        raise ValidationError(f"{features.video_id} carries no grid shape")
    rows, cols = features.grid_shape
    patches = rows * cols
    channel = features.dim // patches
    stacked = features.vectors.astype(np.float64).reshape(
        features.frame_count, patches, channel
    )
    return stacked.mean(axis=1)
