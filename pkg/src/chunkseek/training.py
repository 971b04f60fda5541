"""Soft-match training of the query encoder.

The objective for one example is -cos(q, vbar), where q is the encoded
query and vbar is the softmax-similarity-weighted combination of the
video's chunk representations. The gradient is the total derivative: q
appears both in the outer cosine and in every similarity that feeds the
softmax weights, and both paths are propagated (verified against central
finite differences). A hook accepts an externally computed per-example
gradient on q, so a downstream prediction loss can be folded in without
this module knowing about it.

Training is deterministic under a fixed seed: seeded He-uniform
initialization, a seeded shuffle per epoch, and in-order batch reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NumericError, ValidationError
from .retrieval import QueryEncoder, encode_query
from .store import AnnotationSet, ChunkStore


@dataclass
class TrainingExample:
    """A text feature paired with one video's chunk representation matrix."""

    text_feature: np.ndarray
    chunk_representations: np.ndarray

    def __post_init__(self) -> None:
        self.text_feature = np.ascontiguousarray(self.text_feature, dtype=np.float64)
        self.chunk_representations = np.ascontiguousarray(
            self.chunk_representations, dtype=np.float64
        )
        if self.text_feature.ndim != 1:
            raise ValidationError("text feature must be a vector")
        if self.chunk_representations.ndim != 2 or self.chunk_representations.shape[0] < 1:
            raise ValidationError("chunk representations must be a non-empty matrix")


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings.

    The learning-rate and batch-size defaults are sized for desk-scale
    corpora (hundreds of queries, a handful of epochs). The full-scale
    fine-tuning protocol (learning rate 2e-5, batch 40) yields too few,
    too-small steps to move a freshly initialized encoder on small data;
    pass those values explicitly when mimicking it.
    """

    learning_rate: float = 0.005
    batch_size: int = 16
    epochs: int = 3
    soft_match_weight: float = 10.0
    seed: int = 0
    optimizer: str = "adam"
    hidden_dim: int = 1024
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValidationError("learning rate must be >= 0; batch size and epochs >= 1")
        if self.soft_match_weight < 0:
            raise ValidationError("soft_match_weight must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.hidden_dim < 1:
            raise ValidationError("hidden_dim must be >= 1")


@dataclass
class Gradients:
    """Parameter gradients matching QueryEncoder's tensors."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def zeros_like(cls, enc: QueryEncoder) -> "Gradients":
        return cls(
            np.zeros_like(enc.w1),
            np.zeros_like(enc.b1),
            np.zeros_like(enc.w2),
            np.zeros_like(enc.b2),
        )

    def tensors(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass
class FitResult:
    encoder: QueryEncoder
    step_losses: list[tuple[int, int, float]] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)


def soft_match_loss(query_vec: np.ndarray, chunk_reps: np.ndarray) -> float:
    """-cos(q, softmax-weighted chunk combination); always in [-1, 1]."""
    query_vec = np.ascontiguousarray(query_vec, dtype=np.float64)
    chunk_reps = np.ascontiguousarray(chunk_reps, dtype=np.float64)
    if chunk_reps.ndim != 2 or chunk_reps.shape[0] < 1:
        raise ValidationError("need at least one chunk representation")
    if chunk_reps.shape[1] != query_vec.shape[0]:
        raise ValidationError("query and chunk representation dims differ")
    loss, _ = kernels.soft_match(query_vec, chunk_reps)
    return float(loss)


def soft_match_query_gradient(query_vec: np.ndarray, chunk_reps: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and its total derivative with respect to the encoded query."""
    query_vec = np.ascontiguousarray(query_vec, dtype=np.float64)
    chunk_reps = np.ascontiguousarray(chunk_reps, dtype=np.float64)
    loss, grad = kernels.soft_match(query_vec, chunk_reps)
    return float(loss), np.asarray(grad)


def _backprop(
    enc: QueryEncoder,
    text_feature: np.ndarray,
    hidden_pre: np.ndarray,
    hidden: np.ndarray,
    query_grad: np.ndarray,
    out: Gradients,
) -> None:
    """Accumulate d(loss)/d(params) into ``out`` given d(loss)/d(query)."""
    out.w2 += np.outer(query_grad, hidden)
    out.b2 += query_grad
    hidden_grad = (enc.w2.T @ query_grad) * (hidden_pre > 0.0)
    out.w1 += np.outer(hidden_grad, text_feature)
    out.b1 += hidden_grad


def soft_match_gradient(
    text_feature: np.ndarray, chunk_reps: np.ndarray, enc: QueryEncoder
) -> Gradients:
    """Analytic gradient of the soft-match loss in all four encoder tensors."""
    text_feature = np.ascontiguousarray(text_feature, dtype=np.float64)
    hidden_pre = enc.w1 @ text_feature + enc.b1
    hidden = np.maximum(hidden_pre, 0.0)
    query_vec = enc.w2 @ hidden + enc.b2
    _, query_grad = soft_match_query_gradient(query_vec, chunk_reps)
    grads = Gradients.zeros_like(enc)
    _backprop(enc, text_feature, hidden_pre, hidden, query_grad, grads)
    return grads


def batch_loss_and_grad(
    batch: list[TrainingExample],
    enc: QueryEncoder,
    sm_weight: float,
    external_query_grads: list[np.ndarray] | None = None,
) -> tuple[float, Gradients]:
    """Mean-reduced weighted loss and gradients over a batch.

    ``external_query_grads``, when given, supplies one extra per-example
    gradient on the encoded query (the hook for a prediction loss computed
    elsewhere); it is added before backpropagation through the MLP.
    """
    if not batch:
        raise ValidationError("empty batch")
    if external_query_grads is not None and len(external_query_grads) != len(batch):
        raise ValidationError("external gradient count does not match batch size")
    total = 0.0
    grads = Gradients.zeros_like(enc)
    for i, ex in enumerate(batch):
        hidden_pre = enc.w1 @ ex.text_feature + enc.b1
        hidden = np.maximum(hidden_pre, 0.0)
        query_vec = enc.w2 @ hidden + enc.b2
        loss, query_grad = soft_match_query_gradient(query_vec, ex.chunk_representations)
        total += sm_weight * loss
        upstream = sm_weight * query_grad
        if external_query_grads is not None:
            upstream = upstream + np.asarray(external_query_grads[i], dtype=np.float64)
        _backprop(enc, ex.text_feature, hidden_pre, hidden, upstream, grads)
    scale = 1.0 / len(batch)
    for tensor in grads.tensors():
        tensor *= scale
    return total * scale, grads


class _Adam:
    def __init__(self, enc: QueryEncoder, cfg: TrainConfig):
        self.cfg = cfg
        self.m = Gradients.zeros_like(enc)
        self.v = Gradients.zeros_like(enc)
        self.t = 0

    def step(self, enc: QueryEncoder, grads: Gradients) -> None:
        cfg = self.cfg
        self.t += 1
        correction1 = 1.0 - cfg.adam_beta1**self.t
        correction2 = 1.0 - cfg.adam_beta2**self.t
        params = (enc.w1, enc.b1, enc.w2, enc.b2)
        for p, g, m, v in zip(params, grads.tensors(), self.m.tensors(), self.v.tensors()):
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * np.square(g)
            p -= cfg.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + cfg.adam_eps)


class _Sgd:
    def __init__(self, enc: QueryEncoder, cfg: TrainConfig):
        self.cfg = cfg

    def step(self, enc: QueryEncoder, grads: Gradients) -> None:
        for p, g in zip((enc.w1, enc.b1, enc.w2, enc.b2), grads.tensors()):
            p -= self.cfg.learning_rate * g


def fit(dataset: list[TrainingExample], cfg: TrainConfig) -> FitResult:
    """Train a fresh encoder on the dataset; deterministic under cfg.seed."""
    if not dataset:
        raise ValidationError("empty training dataset")
    text_dim = dataset[0].text_feature.size
    vision_dim = dataset[0].chunk_representations.shape[1]
    for ex in dataset:
        if ex.text_feature.size != text_dim or ex.chunk_representations.shape[1] != vision_dim:
            raise ValidationError("inconsistent feature dims across training examples")

    rng = np.random.default_rng(cfg.seed)
    enc = QueryEncoder.initialize(text_dim, cfg.hidden_dim, vision_dim, rng)
    opt = _Adam(enc, cfg) if cfg.optimizer == "adam" else _Sgd(enc, cfg)

    result = FitResult(encoder=enc)
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_losses = []
        for step, start in enumerate(range(0, n, cfg.batch_size)):
            batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = batch_loss_and_grad(batch, enc, cfg.soft_match_weight)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch}, step {step}")
            opt.step(enc, grads)
            result.step_losses.append((epoch, step, loss))
            epoch_losses.append(loss)
        result.epoch_losses.append(float(np.mean(epoch_losses)))
    return result


def build_training_examples(store: ChunkStore, annotations: AnnotationSet) -> list[TrainingExample]:
    """Pair each annotation's text feature with its video's chunk matrix."""
    return [
        TrainingExample(rec.text_feature, store.representations(rec.video_id))
        for rec in annotations
    ]


def finite_difference_check(
    enc: QueryEncoder,
    example: TrainingExample,
    step: float = 1e-6,
    gradients: Gradients | None = None,
    max_full_coords: int = 2000,
    sample_size: int = 500,
    seed: int = 0,
    fd_noise_floor: float = 1e-9,
) -> float:
    """Max relative error of the analytic gradient vs central differences.

    Checks every coordinate when the encoder is small, otherwise a seeded
    random subsample of ``sample_size`` coordinates. Relative error uses
    max(|analytic|, |fd|, 1e-8) as the denominator. Pass ``gradients`` to
    validate an externally supplied gradient instead of recomputing it.

    Central differences of a loss bounded by 1 carry ~eps/(2*step) of
    roundoff (~1e-10 at the default step); coordinates whose analytic/FD
    difference is below ``fd_noise_floor`` count as exact agreement. The
    loss is scale-invariant in the encoded query, so coordinates with a
    mathematically zero gradient occur structurally (for example the sole
    alive hidden unit of a zero-bias encoder), and without the floor their
    FD values would be pure noise compared against zero.
    """
    if gradients is None:
        gradients = soft_match_gradient(example.text_feature, example.chunk_representations, enc)

    def loss_at(e: QueryEncoder) -> float:
        return soft_match_loss(
            encode_query(example.text_feature, e), example.chunk_representations
        )

    work = enc.copy()
    tensors = (work.w1, work.b1, work.w2, work.b2)
    analytic = gradients.tensors()
    coords = [(ti, idx) for ti, t in enumerate(tensors) for idx in range(t.size)]
    if len(coords) > max_full_coords:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(coords), size=min(sample_size, len(coords)), replace=False)
        coords = [coords[i] for i in picks]

    worst = 0.0
    for ti, idx in coords:
        flat = tensors[ti].reshape(-1)
        orig = flat[idx]
        flat[idx] = orig + step
        plus = loss_at(work)
        flat[idx] = orig - step
        minus = loss_at(work)
        flat[idx] = orig
        fd = (plus - minus) / (2.0 * step)
        a = analytic[ti].reshape(-1)[idx]
        diff = abs(a - fd)
        if diff <= fd_noise_floor:
            continue
        err = diff / max(abs(a), abs(fd), 1e-8)
        if err > worst:
            worst = err
    return worst
