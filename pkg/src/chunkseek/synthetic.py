"""Seeded synthetic corpora with planted question-relevant chunks.

Each video gets a latent direction; its planted chunks are noisy copies of
that direction and the remaining chunks are random unit vectors. The query
text feature is the latent direction pulled back through a modality
transform: the identity (text and vision share a space, so raw cosine
matching is already perfect) or a seeded orthogonal matrix (raw matching is
near chance and the encoder must learn the transform). Token matrices are
filled with zero-mean jitter around the representation, so every chunk's
row mean is its representation by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chunking import Chunk
from .errors import ValidationError
from .store import AnnotationRecord, AnnotationSet, ChunkStore

GAP_IDENTITY = "identity"
GAP_LINEAR = "linear"


@dataclass(frozen=True)
class SynthSpec:
    n_videos: int = 100
    chunks_per_video: int = 40
    ground_truth_per_video: int = 2
    tokens_per_chunk: int = 68
    vision_dim: int = 32
    text_dim: int = 32
    noise_sigma: float = 0.05
    gap: str = GAP_LINEAR
    seed: int = 0
    frames_per_chunk: int = 4

    def __post_init__(self) -> None:
        if self.n_videos < 1 or self.chunks_per_video < 1 or self.tokens_per_chunk < 1:
            raise ValidationError("corpus sizes must be >= 1")
        if not 1 <= self.ground_truth_per_video <= self.chunks_per_video:
            raise ValidationError("ground_truth_per_video must be in [1, chunks_per_video]")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if self.gap not in (GAP_IDENTITY, GAP_LINEAR):
            raise ValidationError(f"unknown modality gap {self.gap!r}")
        if self.vision_dim != self.text_dim:
            raise ValidationError("modality transforms are square: vision_dim must equal text_dim")
        if self.vision_dim < 2:
            raise ValidationError("feature dims must be >= 2")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def generate_corpus(spec: SynthSpec) -> tuple[ChunkStore, AnnotationSet, np.ndarray | None]:
    """Build (store, annotations, text->vision transform or None)."""
    master = np.random.SeedSequence(spec.seed)
    gap_seed, *video_seeds = master.spawn(spec.n_videos + 1)
    transform = None
    if spec.gap == GAP_LINEAR:
        transform = _orthogonal(spec.vision_dim, np.random.default_rng(gap_seed))

    store = ChunkStore()
    records = []
    frames = spec.frames_per_chunk
    for vi, child in enumerate(video_seeds):
        rng = np.random.default_rng(child)
        video_id = f"v{vi:05d}"
        latent = _unit(rng.standard_normal(spec.vision_dim))
        planted = np.sort(
            rng.choice(spec.chunks_per_video, size=spec.ground_truth_per_video, replace=False)
        )
        reps = rng.standard_normal((spec.chunks_per_video, spec.vision_dim))
        reps /= np.linalg.norm(reps, axis=1, keepdims=True)
        for idx in planted:
            reps[idx] = _unit(latent + spec.noise_sigma * rng.standard_normal(spec.vision_dim))

        chunks = []
        for ci in range(spec.chunks_per_video):
            jitter = rng.standard_normal((spec.tokens_per_chunk, spec.vision_dim))
            jitter -= jitter.mean(axis=0, keepdims=True)
            tokens = (reps[ci] + 0.1 * jitter).astype(np.float32)
            chunks.append(Chunk(video_id, ci, tokens, (ci * frames, (ci + 1) * frames)))
        store.add_video(chunks)

        probe = latent + spec.noise_sigma * rng.standard_normal(spec.vision_dim)
        text_feature = probe if transform is None else transform.T @ probe
        records.append(
            AnnotationRecord(
                video_id=video_id,
                question_id=f"{video_id}-q0",
                text_feature=text_feature.astype(np.float32),
                ground_truth_chunks=tuple(int(i) for i in planted),
            )
        )
    return store, AnnotationSet(records), transform


def split(annotations: AnnotationSet, fraction: float, seed: int) -> tuple[AnnotationSet, AnnotationSet]:
    """Disjoint seeded split; ``fraction`` of the records go to the first set."""
    if not 0.0 <= fraction <= 1.0:
        raise ValidationError("fraction must be in [0, 1]")
    n = len(annotations)
    n_first = round(fraction * n)
    perm = np.random.default_rng(seed).permutation(n)
    first = np.sort(perm[:n_first])
    second = np.sort(perm[n_first:])
    recs = annotations.records
    return (
        AnnotationSet([recs[i] for i in first]),
        AnnotationSet([recs[i] for i in second]),
    )
