"""Question-guided video chunk retrieval on precomputed frame features.

Videos arrive as per-frame patch-feature tensors, get pooled into compact
per-chunk token sets, and are ranked against an encoded question by cosine
similarity; the top-K chunks provide the context for a downstream decoder.
The query encoder is trained with a soft-match objective. See the README
for the binary interchange formats and the CLI.
"""

from .chunking import Chunk, ChunkConfig, FrameFeatureMap, tokenize_video
from .errors import ChunkSeekError, DecodeError, NumericError, UsageError, ValidationError
from .evaluation import EvalReport, compare_strategies, expected_uniform_hitrate, flops_savings, k_sweep
from .retrieval import (
    Projector,
    QueryEncoder,
    RetrievalResult,
    baseline_match,
    cosine_similarity,
    encode_query,
    project_tokens,
    retrieve,
    score_chunks,
    top_k,
    uniform_select,
)
from .store import AnnotationRecord, AnnotationSet, ChunkStore, import_frame_features, load_annotations, save_annotations
from .synthetic import SynthSpec, generate_corpus, split
from .training import TrainConfig, TrainingExample, fit, finite_difference_check, soft_match_gradient, soft_match_loss

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "AnnotationSet",
    "Chunk",
    "ChunkConfig",
    "ChunkSeekError",
    "ChunkStore",
    "DecodeError",
    "EvalReport",
    "FrameFeatureMap",
    "NumericError",
    "Projector",
    "QueryEncoder",
    "RetrievalResult",
    "SynthSpec",
    "TrainConfig",
    "TrainingExample",
    "UsageError",
    "ValidationError",
    "baseline_match",
    "compare_strategies",
    "cosine_similarity",
    "encode_query",
    "expected_uniform_hitrate",
    "finite_difference_check",
    "fit",
    "flops_savings",
    "generate_corpus",
    "import_frame_features",
    "k_sweep",
    "load_annotations",
    "project_tokens",
    "retrieve",
    "save_annotations",
    "score_chunks",
    "soft_match_gradient",
    "soft_match_loss",
    "split",
    "tokenize_video",
    "top_k",
    "uniform_select",
]
