"""Query encoding, cosine scoring, and top-K chunk selection.

The query encoder is a two-layer ReLU MLP that lifts a frozen text feature
into the chunk representation space; retrieval ranks a video's chunks by
cosine similarity to the encoded query and exports the selected chunks'
tokens in time order. A frozen linear projector can lift the exported
tokens to a downstream model's embedding width. Everything here is pure and
safe to call concurrently; only the trainer mutates an encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .chunking import Chunk, ChunkConfig
from .errors import ValidationError
from .store import ChunkStore


@dataclass
class QueryEncoder:
    """w2 @ relu(w1 @ t + b1) + b2, mapping text_dim -> vision_dim."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValidationError("encoder weights must be matrices")
        hidden, _ = self.w1.shape
        vision, hidden2 = self.w2.shape
        if hidden2 != hidden or self.b1.shape != (hidden,) or self.b2.shape != (vision,):
            raise ValidationError("encoder weight shapes are inconsistent")

    @property
    def text_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def vision_dim(self) -> int:
        return self.w2.shape[0]

    @classmethod
    def initialize(
        cls,
        text_dim: int = 768,
        hidden_dim: int = 1024,
        vision_dim: int = 1024,
        rng: np.random.Generator | None = None,
    ) -> "QueryEncoder":
        """He-uniform weights, zero biases, from a seeded generator."""
        rng = rng if rng is not None else np.random.default_rng(0)
        lim1 = np.sqrt(6.0 / text_dim)
        lim2 = np.sqrt(6.0 / hidden_dim)
        return cls(
            w1=rng.uniform(-lim1, lim1, size=(hidden_dim, text_dim)),
            b1=np.zeros(hidden_dim),
            w2=rng.uniform(-lim2, lim2, size=(vision_dim, hidden_dim)),
            b2=np.zeros(vision_dim),
        )

    @classmethod
    def identity(cls, dim: int) -> "QueryEncoder":
        """An exact pass-through encoder: relu(t) - relu(-t) == t."""
        eye = np.eye(dim)
        return cls(
            w1=np.concatenate([eye, -eye], axis=0),
            b1=np.zeros(2 * dim),
            w2=np.concatenate([eye, -eye], axis=1),
            b2=np.zeros(dim),
        )

    def copy(self) -> "QueryEncoder":
        return QueryEncoder(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass
class Projector:
    """Row-wise affine map from vision_dim to a downstream embedding width."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValidationError("projector weight/bias shapes are inconsistent")

    @property
    def vision_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class RetrievalResult:
    """Ranked selection for one query against one video."""

    video_id: str
    ranked: list[tuple[int, float]]
    selected_time_ordered: list[int]
    exported_tokens: np.ndarray | None = None


def encode_query(text_feature: np.ndarray, encoder: QueryEncoder) -> np.ndarray:
    text_feature = np.asarray(text_feature, dtype=np.float64)
    if text_feature.shape != (encoder.text_dim,):
        raise ValidationError(
            f"text feature has shape {text_feature.shape}, encoder expects ({encoder.text_dim},)"
        )
    hidden = np.maximum(encoder.w1 @ text_feature + encoder.b1, 0.0)
    return encoder.w2 @ hidden + encoder.b2


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"cosine needs two equal-length vectors, got {a.shape} and {b.shape}")
    return float(kernels.cosine_scores(a, b[None, :])[0])


def score_chunks(query_vec: np.ndarray, chunks: list[Chunk]) -> np.ndarray:
    """Cosine of the encoded query against each chunk representation."""
    if not chunks:
        raise ValidationError("no chunks to score")
    reps = np.stack([c.representation for c in chunks])
    return score_representations(query_vec, reps)


def score_representations(query_vec: np.ndarray, reps: np.ndarray) -> np.ndarray:
    query_vec = np.ascontiguousarray(query_vec, dtype=np.float64)
    reps = np.ascontiguousarray(reps, dtype=np.float64)
    if reps.ndim != 2 or reps.shape[1] != query_vec.shape[0]:
        raise ValidationError(f"representation matrix {reps.shape} does not match query {query_vec.shape}")
    return kernels.cosine_scores(query_vec, reps)


def top_k(scores: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Highest-scoring min(k, len) indices; ties go to the earlier chunk."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValidationError("cannot rank an empty score list")
    if k < 1:
        raise ValidationError("k must be >= 1")
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    return [(i, float(scores[i])) for i in order[: min(k, scores.size)]]


def uniform_select(n_chunks: int, k: int) -> list[int]:
    """K evenly spaced chunk indices: floor((i + 0.5) * n / k), deduplicated."""
    if n_chunks < 1 or k < 1:
        raise ValidationError("n_chunks and k must be >= 1")
    if n_chunks <= k:
        return list(range(n_chunks))
    return sorted({int((i + 0.5) * n_chunks / k) for i in range(k)})


def baseline_match(aligned_query: np.ndarray, aligned_reps: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Rank chunks by cosine in an already-shared space; no encoder."""
    return top_k(score_representations(aligned_query, np.asarray(aligned_reps)), k)


def project_tokens(tokens: np.ndarray, projector: Projector) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[1] != projector.vision_dim:
        raise ValidationError(
            f"token matrix {tokens.shape} does not match projector input dim {projector.vision_dim}"
        )
    return tokens @ projector.weight.T + projector.bias


def retrieve(
    text_feature: np.ndarray,
    video_id: str,
    store: ChunkStore,
    encoder: QueryEncoder,
    cfg: ChunkConfig,
    projector: Projector | None = None,
    export_tokens: bool = True,
) -> RetrievalResult:
    """Encode, score, rank, and export the selected chunks in time order."""
    chunks = store.get_chunks(video_id)
    query_vec = encode_query(text_feature, encoder)
    scores = score_representations(query_vec, store.representations(video_id))
    ranked = top_k(scores, cfg.top_k)
    selected = sorted(i for i, _ in ranked)
    exported = None
    if export_tokens:
        exported = np.concatenate([chunks[i].tokens.astype(np.float64) for i in selected])
        if projector is not None:
            exported = project_tokens(exported, projector)
    return RetrievalResult(video_id, ranked, selected, exported)
