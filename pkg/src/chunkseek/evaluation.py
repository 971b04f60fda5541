"""Retrieval-quality metrics, strategy comparisons, K sweeps, and the
inference cost model.

The headline metric is recall@K against ground-truth chunk annotations: a
query counts as a hit when its selected chunk set intersects the annotated
set. Three selection strategies are compared: the trained encoder
("retrieval"), evenly spaced selection ("uniform"), and raw cosine matching
in a shared space with no learned parameters ("clip_match"). The analytic
hit rate of selecting K chunks uniformly at random gives the chance
baseline, and the cost model estimates the fraction of downstream decoder
FLOPs avoided by feeding only K chunks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .chunking import ChunkConfig
from .errors import ValidationError
from .retrieval import (
    QueryEncoder,
    baseline_match,
    encode_query,
    score_representations,
    top_k,
    uniform_select,
)
from .store import AnnotationSet, ChunkStore

STRATEGY_RETRIEVAL = "retrieval"
STRATEGY_UNIFORM = "uniform"
STRATEGY_CLIP_MATCH = "clip_match"
ALL_STRATEGIES = (STRATEGY_RETRIEVAL, STRATEGY_UNIFORM, STRATEGY_CLIP_MATCH)


@dataclass(frozen=True)
class StrategyMetrics:
    recall_at_k: float
    mean_best_rank: float
    n_queries: int


@dataclass
class EvalReport:
    k: int
    per_strategy: dict[str, StrategyMetrics]

    def to_lines(self) -> list[str]:
        return [
            json.dumps(
                {
                    "strategy": name,
                    "k": self.k,
                    "recall_at_k": metrics.recall_at_k,
                    "mean_best_rank": metrics.mean_best_rank,
                    "n_queries": metrics.n_queries,
                }
            )
            for name, metrics in self.per_strategy.items()
        ]


def recall_at_k(selected, ground_truth) -> int:
    """1 if any selected chunk is in the ground-truth set, else 0."""
    return 1 if set(selected) & set(ground_truth) else 0


def expected_uniform_hitrate(n_chunks: int, n_relevant: int, k: int) -> float:
    """P(random K-subset of [0, n) intersects a fixed g-subset), exactly.

    1 - C(n - g, k) / C(n, k) with integer combinatorics, so the result is
    exact up to the final float division.
    """
    if not 0 <= n_relevant <= n_chunks:
        raise ValidationError("n_relevant must be in [0, n_chunks]")
    if not 1 <= k <= n_chunks:
        raise ValidationError("k must be in [1, n_chunks]")
    miss = math.comb(n_chunks - n_relevant, k)
    total = math.comb(n_chunks, k)
    return 1.0 - miss / total


def flops_savings(num_chunks: int, tokens_per_chunk: int, k: int, text_tokens: int) -> float:
    """Fraction of decoder inference FLOPs avoided by keeping only K chunks.

    FLOPs scale with the token count, so the saving is
    (vis - vis') / (text + vis) with vis = num_chunks * tokens_per_chunk and
    vis' = min(k, num_chunks) * tokens_per_chunk; zero when nothing is cut.
    """
    if min(num_chunks, tokens_per_chunk, k, text_tokens) < 1:
        raise ValidationError("all cost-model arguments must be >= 1")
    vis = num_chunks * tokens_per_chunk
    vis_kept = min(k, num_chunks) * tokens_per_chunk
    return max(0.0, (vis - vis_kept) / (text_tokens + vis))


def savings_percent(fraction: float) -> int:
    """Whole-percent rounding, half up."""
    return int(math.floor(fraction * 100.0 + 0.5))


def _best_rank(ranked: list[tuple[int, float]], ground_truth) -> int:
    gt = set(ground_truth)
    for pos, (idx, _) in enumerate(ranked, start=1):
        if idx in gt:
            return pos
    return len(ranked) + 1


def _uniform_best_rank(n_chunks: int, ground_truth) -> int:
    """Smallest K at which evenly spaced selection hits the ground truth."""
    gt = set(ground_truth)
    for k in range(1, n_chunks + 1):
        if set(uniform_select(n_chunks, k)) & gt:
            return k
    return n_chunks  # unreachable: K = n selects everything

def compare_strategies(
    store: ChunkStore,
    annotations: AnnotationSet,
    encoder: QueryEncoder | None,
    cfg: ChunkConfig,
    strategies: tuple[str, ...] = ALL_STRATEGIES,
) -> EvalReport:
    """Recall@K and mean best rank per strategy over every annotated query.

    The clip_match strategy scores the raw text feature against the chunk
    representations, so it requires the two spaces to share a dimension;
    retrieval requires an encoder. Results do not depend on record order.
    """
    if len(annotations) == 0:
        raise ValidationError("no annotation records to evaluate")
    unknown = set(strategies) - set(ALL_STRATEGIES)
    if unknown:
        raise ValidationError(f"unknown strategies: {sorted(unknown)}")
    if STRATEGY_RETRIEVAL in strategies and encoder is None:
        raise ValidationError("retrieval strategy needs an encoder")

    k = cfg.top_k
    hits = {name: 0 for name in strategies}
    rank_sum = {name: 0 for name in strategies}
    for rec in annotations:
        reps = store.representations(rec.video_id)
        n_chunks = reps.shape[0]
        for chunk_idx in rec.ground_truth_chunks:
            if chunk_idx >= n_chunks:
                raise ValidationError(
                    f"{rec.question_id}: ground-truth chunk {chunk_idx} out of range"
                )
        if STRATEGY_RETRIEVAL in strategies:
            scores = score_representations(encode_query(rec.text_feature, encoder), reps)
            ranked = top_k(scores, n_chunks)
            hits[STRATEGY_RETRIEVAL] += recall_at_k(
                [i for i, _ in ranked[:k]], rec.ground_truth_chunks
            )
            rank_sum[STRATEGY_RETRIEVAL] += _best_rank(ranked, rec.ground_truth_chunks)
        if STRATEGY_UNIFORM in strategies:
            selected = uniform_select(n_chunks, k)
            hits[STRATEGY_UNIFORM] += recall_at_k(selected, rec.ground_truth_chunks)
            rank_sum[STRATEGY_UNIFORM] += _uniform_best_rank(n_chunks, rec.ground_truth_chunks)
        if STRATEGY_CLIP_MATCH in strategies:
            if rec.text_feature.size != reps.shape[1]:
                raise ValidationError(
                    "clip_match needs text and vision features in one space; "
                    f"got dims {rec.text_feature.size} and {reps.shape[1]}"
                )
            ranked = baseline_match(rec.text_feature, reps, n_chunks)
            hits[STRATEGY_CLIP_MATCH] += recall_at_k(
                [i for i, _ in ranked[:k]], rec.ground_truth_chunks
            )
            rank_sum[STRATEGY_CLIP_MATCH] += _best_rank(ranked, rec.ground_truth_chunks)

    n = len(annotations)
    return EvalReport(
        k=k,
        per_strategy={
            name: StrategyMetrics(hits[name] / n, rank_sum[name] / n, n) for name in strategies
        },
    )


def k_sweep(
    store: ChunkStore,
    annotations: AnnotationSet,
    encoder: QueryEncoder | None,
    k_values: list[int],
    strategies: tuple[str, ...] = ALL_STRATEGIES,
) -> list[EvalReport]:
    """One report per K. For score-ranked strategies, larger K selects a
    superset, so recall is non-decreasing along the sweep."""
    if not k_values:
        raise ValidationError("k_values must be non-empty")
    return [
        compare_strategies(store, annotations, encoder, ChunkConfig(top_k=k), strategies)
        for k in k_values
    ]
