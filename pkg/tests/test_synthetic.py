import numpy as np
import pytest

from chunkseek.chunking import ChunkConfig
from chunkseek.errors import ValidationError
from chunkseek.evaluation import compare_strategies, expected_uniform_hitrate
from chunkseek.retrieval import QueryEncoder, baseline_match
from chunkseek.synthetic import SynthSpec, generate_corpus, split


def small_spec(**overrides):
    base = dict(
        n_videos=20,
        chunks_per_video=10,
        ground_truth_per_video=2,
        tokens_per_chunk=5,
        vision_dim=16,
        text_dim=16,
        noise_sigma=0.05,
        gap="linear",
        seed=0,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestGeneration:
    def test_identity_noiseless_baseline_is_perfect(self):
        store, annotations, transform = generate_corpus(
            small_spec(gap="identity", noise_sigma=0.0)
        )
        assert transform is None
        for rec in annotations:
            ranked = baseline_match(rec.text_feature, store.representations(rec.video_id), 1)
            assert ranked[0][0] in rec.ground_truth_chunks

    def test_planted_chunks_strictly_highest_cosine(self):
        store, annotations, _ = generate_corpus(small_spec(gap="identity", noise_sigma=0.0))
        for rec in annotations:
            reps = store.representations(rec.video_id)
            scores = reps @ rec.text_feature / (
                np.linalg.norm(reps, axis=1) * np.linalg.norm(rec.text_feature)
            )
            gt = set(rec.ground_truth_chunks)
            best_out = max(s for i, s in enumerate(scores) if i not in gt)
            worst_in = min(scores[i] for i in gt)
            assert worst_in > best_out

    def test_same_seed_is_bitwise_identical(self):
        s1, a1, t1 = generate_corpus(small_spec())
        s2, a2, t2 = generate_corpus(small_spec())
        assert s1.video_ids() == s2.video_ids()
        for vid in s1.video_ids():
            for c1, c2 in zip(s1.get_chunks(vid), s2.get_chunks(vid)):
                assert c1.tokens.tobytes() == c2.tokens.tobytes()
        for r1, r2 in zip(a1, a2):
            assert r1.text_feature.tobytes() == r2.text_feature.tobytes()
            assert r1.ground_truth_chunks == r2.ground_truth_chunks
        np.testing.assert_array_equal(t1, t2)

    def test_different_seed_differs(self):
        s1, _, _ = generate_corpus(small_spec(seed=0))
        s2, _, _ = generate_corpus(small_spec(seed=1))
        c1 = s1.get_chunks("v00000")[0]
        c2 = s2.get_chunks("v00000")[0]
        assert c1.tokens.tobytes() != c2.tokens.tobytes()

    def test_chunk_invariant_holds(self):
        store, _, _ = generate_corpus(small_spec())
        for vid in store.video_ids():
            for chunk in store.get_chunks(vid):
                np.testing.assert_allclose(
                    chunk.representation,
                    chunk.tokens.astype(np.float64).mean(axis=0),
                    atol=1e-12,
                )

    def test_transform_is_orthogonal(self):
        _, _, transform = generate_corpus(small_spec())
        np.testing.assert_allclose(
            transform @ transform.T, np.eye(transform.shape[0]), atol=1e-12
        )

    def test_linear_gap_defeats_raw_matching(self):
        # with the modality gap, raw cosine matching degrades to near chance
        spec = small_spec(n_videos=100, chunks_per_video=20)
        store, annotations, _ = generate_corpus(spec)
        report = compare_strategies(
            store, annotations, None, ChunkConfig(top_k=3), ("clip_match",)
        )
        p = expected_uniform_hitrate(20, 2, 3)
        sigma = (p * (1 - p) / len(annotations)) ** 0.5
        assert abs(report.per_strategy["clip_match"].recall_at_k - p) < 4 * sigma

    def test_mismatched_dims_rejected(self):
        with pytest.raises(ValidationError):
            small_spec(text_dim=8)

    def test_invalid_ground_truth_count_rejected(self):
        with pytest.raises(ValidationError):
            small_spec(ground_truth_per_video=11)


class TestSplit:
    def make(self, n=200):
        _, annotations, _ = generate_corpus(small_spec(n_videos=n, chunks_per_video=4))
        return annotations

    def test_fraction_zero(self):
        annotations = self.make(10)
        train, heldout = split(annotations, 0.0, seed=0)
        assert len(train) == 0 and len(heldout) == 10

    def test_fraction_one(self):
        annotations = self.make(10)
        train, heldout = split(annotations, 1.0, seed=0)
        assert len(train) == 10 and len(heldout) == 0

    def test_eighty_twenty_exact_sizes(self):
        annotations = self.make(200)
        train, heldout = split(annotations, 0.8, seed=0)
        assert len(train) == 160 and len(heldout) == 40

    def test_disjoint_and_complete(self):
        annotations = self.make(50)
        train, heldout = split(annotations, 0.6, seed=3)
        train_ids = {r.question_id for r in train}
        heldout_ids = {r.question_id for r in heldout}
        assert not train_ids & heldout_ids
        assert train_ids | heldout_ids == {r.question_id for r in annotations}

    def test_seeded_and_seed_sensitive(self):
        annotations = self.make(50)
        a1 = [r.question_id for r in split(annotations, 0.5, seed=1)[0]]
        a2 = [r.question_id for r in split(annotations, 0.5, seed=1)[0]]
        b = [r.question_id for r in split(annotations, 0.5, seed=2)[0]]
        assert a1 == a2
        assert a1 != b

    def test_bad_fraction_rejected(self):
        with pytest.raises(ValidationError):
            split(self.make(10), 1.5, seed=0)
