"""Turn per-frame feature tensors into fixed-size chunk token sets.

A video arrives as a (frames, grid_h, grid_w, dim) tensor of patch features
sampled at a fixed rate. It is cut into non-overlapping segments of
``frames_per_chunk`` frames; each segment is average-pooled spatially with
``spatial_stride``, then reduced to a compact token matrix: one token per
spatial position (temporal mean) plus one token per frame (spatial mean).
Under the defaults (4 frames, 16x16 grid, stride 2) that is 64 + 4 = 68
tokens per chunk. All pooling runs in float64; chunk tokens are stored as
float32, the interchange precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ValidationError


@dataclass(frozen=True)
class ChunkConfig:
    """Knobs for chunking and retrieval size."""

    frames_per_chunk: int = 4
    spatial_stride: int = 2
    top_k: int = 5

    def __post_init__(self) -> None:
        if self.frames_per_chunk < 1:
            raise ValidationError("frames_per_chunk must be >= 1")
        if self.spatial_stride < 1:
            raise ValidationError("spatial_stride must be >= 1")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")


@dataclass
class FrameFeatureMap:
    """Per-frame patch features for one video: (frames, grid_h, grid_w, dim)."""

    video_id: str
    data: np.ndarray
    fps: float = 1.0

    def __post_init__(self) -> None:
        if self.data.ndim != 4:
            raise ValidationError(
                f"frame features must be 4-D (frames, h, w, dim), got {self.data.ndim}-D"
            )
        t, h, w, d = self.data.shape
        if t < 1 or d < 1:
            raise ValidationError(f"need at least one frame and one feature dim, got {self.data.shape}")
        if h < 2 or w < 2 or h % 2 or w % 2:
            raise ValidationError(f"grid must be even and at least 2x2, got {h}x{w}")
        if self.fps <= 0:
            raise ValidationError("fps must be positive")

    @property
    def frame_count(self) -> int:
        return self.data.shape[0]

    @property
    def grid_h(self) -> int:
        return self.data.shape[1]

    @property
    def grid_w(self) -> int:
        return self.data.shape[2]

    @property
    def feature_dim(self) -> int:
        return self.data.shape[3]


@dataclass
class Chunk:
    """One pooled video segment: token matrix plus its mean vector.

    ``tokens`` is float32 with n_spatial + n_frames rows. ``representation``
    is always derived as the float64 row mean, so the two can never drift.
    ``frame_span`` is the half-open range of real source frames (the last
    chunk of a video may cover fewer than frames_per_chunk).
    """

    video_id: str
    index: int
    tokens: np.ndarray
    frame_span: tuple[int, int]
    representation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.tokens.ndim != 2 or self.tokens.shape[0] < 1 or self.tokens.shape[1] < 1:
            raise ValidationError(f"chunk tokens must be a non-empty matrix, got {self.tokens.shape}")
        if self.index < 0:
            raise ValidationError("chunk index must be >= 0")
        start, end = self.frame_span
        if start < 0 or end <= start:
            raise ValidationError(f"bad frame span {self.frame_span}")
        self.tokens = np.ascontiguousarray(self.tokens, dtype=np.float32)
        self.representation = chunk_representation(self.tokens)

    @property
    def token_count(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def split_into_chunks(frames: FrameFeatureMap, cfg: ChunkConfig) -> list[np.ndarray]:
    """Cut the video into ceil(frames / frames_per_chunk) raw segments.

    Each returned tensor is float64 with exactly frames_per_chunk frames; a
    trailing partial segment is padded by replicating its last real frame.
    """
    m = cfg.frames_per_chunk
    data = frames.data.astype(np.float64, copy=False)
    t = frames.frame_count
    out = []
    for start in range(0, t, m):
        seg = data[start : start + m]
        if seg.shape[0] < m:
            pad = np.repeat(seg[-1:], m - seg.shape[0], axis=0)
            seg = np.concatenate([seg, pad], axis=0)
        out.append(np.ascontiguousarray(seg))
    return out


def spatial_downsample(chunk_frames: np.ndarray, stride: int) -> np.ndarray:
    """Average-pool each frame over non-overlapping stride x stride windows."""
    if chunk_frames.ndim != 4:
        raise ValidationError("expected a (frames, h, w, dim) tensor")
    _, h, w, _ = chunk_frames.shape
    if stride < 1 or h % stride or w % stride:
        raise ValidationError(f"stride {stride} does not divide grid {h}x{w}")
    return kernels.window_mean(np.ascontiguousarray(chunk_frames, dtype=np.float64), stride)


def pool_chunk_tokens(down: np.ndarray) -> np.ndarray:
    """Reduce a downsampled segment to (n_positions + n_frames) tokens.

    Row order: per-position temporal means in row-major grid order, then
    per-frame spatial means in time order.
    """
    if down.ndim != 4:
        raise ValidationError("expected a (frames, h, w, dim) tensor")
    return kernels.pool_tokens(np.ascontiguousarray(down, dtype=np.float64))


def chunk_representation(tokens: np.ndarray) -> np.ndarray:
    """Mean of the token rows, in float64."""
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValidationError("token matrix must have at least one row")
    return tokens.astype(np.float64, copy=False).mean(axis=0)


def tokenize_video(frames: FrameFeatureMap, cfg: ChunkConfig) -> list[Chunk]:
    """Full pipeline: split, downsample, pool; returns the video's chunks."""
    if frames.grid_h % cfg.spatial_stride or frames.grid_w % cfg.spatial_stride:
        raise ValidationError(
            f"spatial_stride {cfg.spatial_stride} does not divide the "
            f"{frames.grid_h}x{frames.grid_w} grid"
        )
    m = cfg.frames_per_chunk
    chunks = []
    for idx, raw in enumerate(split_into_chunks(frames, cfg)):
        down = spatial_downsample(raw, cfg.spatial_stride)
        tokens = pool_chunk_tokens(down).astype(np.float32)
        start = idx * m
        span = (start, min(start + m, frames.frame_count))
        chunks.append(Chunk(frames.video_id, idx, tokens, span))
    return chunks
