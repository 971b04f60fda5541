import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chunkseek.errors import NumericError, ValidationError
from chunkseek.retrieval import QueryEncoder, encode_query
from chunkseek.training import (
    Gradients,
    TrainConfig,
    TrainingExample,
    batch_loss_and_grad,
    finite_difference_check,
    fit,
    soft_match_gradient,
    soft_match_loss,
    soft_match_query_gradient,
)


def soft_match_oracle(q, reps):
    """Straight-line recomputation of the loss, scalar by scalar."""
    import math

    def cos(a, b):
        num = sum(x * y for x, y in zip(a, b))
        den = max(math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)), 1e-12)
        return num / den

    scores = [cos(q, row) for row in reps]
    exps = [math.exp(s) for s in scores]
    total = sum(exps)
    weights = [e / total for e in exps]
    vbar = [sum(w * row[k] for w, row in zip(weights, reps)) for k in range(len(q))]
    return -cos(q, vbar), weights


def random_instance(rng, text_dim=5, hidden=6, vision=4, n_chunks=3):
    enc = QueryEncoder.initialize(text_dim, hidden, vision, rng)
    example = TrainingExample(
        rng.standard_normal(text_dim), rng.standard_normal((n_chunks, vision))
    )
    return enc, example


class TestSoftMatchLoss:
    def test_single_chunk_reduces_to_cosine(self, rng):
        q = rng.standard_normal(4)
        v = rng.standard_normal((1, 4))
        from chunkseek.retrieval import cosine_similarity

        assert soft_match_loss(q, v) == pytest.approx(-cosine_similarity(q, v[0]), abs=1e-12)

    def test_identical_rows_reduce_to_cosine(self, rng):
        q = rng.standard_normal(4)
        row = rng.standard_normal(4)
        v = np.tile(row, (6, 1))
        from chunkseek.retrieval import cosine_similarity

        assert soft_match_loss(q, v) == pytest.approx(-cosine_similarity(q, row), abs=1e-12)

    def test_matches_straight_line_oracle(self, rng):
        q = rng.standard_normal(3)
        v = rng.standard_normal((4, 3))
        expected, _ = soft_match_oracle(q.tolist(), v.tolist())
        assert soft_match_loss(q, v) == pytest.approx(expected, abs=1e-12)

    def test_loss_range(self, rng):
        for _ in range(50):
            q = rng.standard_normal(5)
            v = rng.standard_normal((rng.integers(1, 8), 5))
            assert -1.0 - 1e-12 <= soft_match_loss(q, v) <= 1.0 + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 100_000), scale=st.floats(0.01, 100.0))
    def test_uniform_row_scaling_leaves_loss_unchanged(self, seed, scale):
        gen = np.random.default_rng(seed)
        q = gen.standard_normal(4)
        v = gen.standard_normal((5, 4))
        assert soft_match_loss(q, scale * v) == pytest.approx(soft_match_loss(q, v), abs=1e-12)

    def test_softmax_weight_properties(self, rng):
        q = rng.standard_normal(6)
        v = rng.standard_normal((7, 6))
        _, weights = soft_match_oracle(q.tolist(), v.tolist())
        assert all(w > 0 for w in weights)
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)


class TestQueryGradient:
    def test_l1_aligned_query_is_stationary(self, rng):
        v = rng.standard_normal((1, 5))
        q = 3.0 * v[0]
        loss, grad = soft_match_query_gradient(q, v)
        assert loss == pytest.approx(-1.0, abs=1e-12)
        # at alignment the cosine is maximal and scale-invariant: whole
        # gradient vanishes, orthogonal projection included
        ortho = grad - (grad @ v[0]) / (v[0] @ v[0]) * v[0]
        np.testing.assert_allclose(ortho, np.zeros(5), atol=1e-10)
        np.testing.assert_allclose(grad, np.zeros(5), atol=1e-10)


class TestParameterGradient:
    def test_dead_relu_leaves_only_output_bias(self, rng):
        enc = QueryEncoder(
            w1=np.zeros((4, 3)),
            b1=np.zeros(4),
            w2=rng.standard_normal((5, 4)),
            b2=rng.standard_normal(5),
        )
        example = TrainingExample(rng.standard_normal(3), rng.standard_normal((3, 5)))
        grads = soft_match_gradient(example.text_feature, example.chunk_representations, enc)
        np.testing.assert_array_equal(grads.w2, np.zeros_like(enc.w2))
        np.testing.assert_array_equal(grads.w1, np.zeros_like(enc.w1))
        np.testing.assert_array_equal(grads.b1, np.zeros_like(enc.b1))
        assert np.abs(grads.b2).max() > 0

    def test_matches_finite_differences(self, rng):
        enc, example = random_instance(rng)
        assert finite_difference_check(enc, example) < 1e-4

    def test_corrupted_gradient_fails_check(self, rng):
        enc, example = random_instance(rng)
        grads = soft_match_gradient(example.text_feature, example.chunk_representations, enc)
        flat = grads.w2.reshape(-1)
        target = np.argmax(np.abs(flat))
        flat[target] *= 2.0
        assert finite_difference_check(enc, example, gradients=grads) > 1e-2

    def test_zero_gradient_case_reports_zero_error(self, rng):
        enc = QueryEncoder(
            w1=np.zeros((4, 3)), b1=np.zeros(4), w2=np.zeros((2, 4)), b2=np.zeros(2)
        )
        # loss is flat at the guard point; analytic and FD both vanish
        example = TrainingExample(np.zeros(3), np.zeros((2, 2)))
        assert finite_difference_check(enc, example) == 0.0


class TestBatch:
    def test_identical_examples_match_single(self, rng):
        enc, example = random_instance(rng)
        single_loss, single = batch_loss_and_grad([example], enc, sm_weight=10.0)
        batch_loss, batch = batch_loss_and_grad([example] * 4, enc, sm_weight=10.0)
        assert batch_loss == pytest.approx(single_loss, abs=1e-12)
        for a, b in zip(single.tensors(), batch.tensors()):
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_zero_weight_no_external_grad_is_zero(self, rng):
        enc, example = random_instance(rng)
        loss, grads = batch_loss_and_grad([example], enc, sm_weight=0.0)
        assert loss == 0.0
        assert all(np.abs(t).max() == 0.0 for t in grads.tensors())

    def test_two_example_batch_is_mean_of_singles(self, rng):
        enc, ex1 = random_instance(rng)
        _, ex2 = random_instance(rng)
        l1, g1 = batch_loss_and_grad([ex1], enc, sm_weight=10.0)
        l2, g2 = batch_loss_and_grad([ex2], enc, sm_weight=10.0)
        lb, gb = batch_loss_and_grad([ex1, ex2], enc, sm_weight=10.0)
        assert lb == pytest.approx((l1 + l2) / 2, abs=1e-12)
        for a, b, c in zip(g1.tensors(), g2.tensors(), gb.tensors()):
            np.testing.assert_allclose((a + b) / 2, c, atol=1e-12)

    def test_external_query_gradient_hook(self, rng):
        enc, example = random_instance(rng)
        ext = rng.standard_normal(enc.vision_dim)
        _, with_hook = batch_loss_and_grad([example], enc, sm_weight=0.0, external_query_grads=[ext])
        # with sm_weight 0 the hook is the only upstream signal
        hidden_pre = enc.w1 @ example.text_feature + enc.b1
        hidden = np.maximum(hidden_pre, 0.0)
        np.testing.assert_allclose(with_hook.b2, ext, atol=1e-12)
        np.testing.assert_allclose(with_hook.w2, np.outer(ext, hidden), atol=1e-12)


class TestFit:
    def make_alignable_dataset(self, rng, n=8, dim=6):
        # a linear map (identity) aligns each query with its single chunk
        examples = []
        for _ in range(n):
            u = rng.standard_normal(dim)
            u /= np.linalg.norm(u)
            examples.append(TrainingExample(u, u[None, :]))
        return examples

    def test_loss_approaches_perfect_alignment(self, rng):
        dataset = self.make_alignable_dataset(rng, n=1)
        cfg = TrainConfig(learning_rate=0.01, batch_size=1, epochs=200, hidden_dim=16, seed=3)
        result = fit(dataset, cfg)
        # soft_match_weight 10 scales the floor to -10
        assert result.epoch_losses[-1] < -9.9

    def test_zero_learning_rate_keeps_parameters(self, rng):
        dataset = self.make_alignable_dataset(rng)
        cfg = TrainConfig(learning_rate=0.0, epochs=2, hidden_dim=8, seed=5)
        result = fit(dataset, cfg)
        init = QueryEncoder.initialize(6, 8, 6, np.random.default_rng(5))
        for a, b in zip(
            (result.encoder.w1, result.encoder.b1, result.encoder.w2, result.encoder.b2),
            (init.w1, init.b1, init.w2, init.b2),
        ):
            np.testing.assert_array_equal(a, b)

    def test_fixed_seed_reproduces_history_bitwise(self, rng):
        dataset = self.make_alignable_dataset(rng)
        cfg = TrainConfig(epochs=3, hidden_dim=8, seed=7, batch_size=3)
        r1 = fit(dataset, cfg)
        r2 = fit(dataset, cfg)
        assert r1.step_losses == r2.step_losses
        for a, b in zip(
            (r1.encoder.w1, r1.encoder.b1, r1.encoder.w2, r1.encoder.b2),
            (r2.encoder.w1, r2.encoder.b1, r2.encoder.w2, r2.encoder.b2),
        ):
            assert a.tobytes() == b.tobytes()

    def test_sgd_option(self, rng):
        dataset = self.make_alignable_dataset(rng, n=1)
        cfg = TrainConfig(learning_rate=0.5, optimizer="sgd", epochs=100, batch_size=1, hidden_dim=16, seed=3)
        result = fit(dataset, cfg)
        assert result.epoch_losses[-1] < result.epoch_losses[0]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            fit([], TrainConfig())

    def test_nan_loss_aborts(self, rng):
        bad = TrainingExample(np.full(4, np.nan), rng.standard_normal((2, 4)))
        with pytest.raises(NumericError, match="non-finite"):
            fit([bad], TrainConfig(hidden_dim=4))

    def test_bad_config_rejected(self):
        with pytest.raises(ValidationError):
            TrainConfig(optimizer="rmsprop")
        with pytest.raises(ValidationError):
            TrainConfig(epochs=0)
