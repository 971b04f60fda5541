import numpy as np
import pytest

from chunkseek import binio
from chunkseek.chunking import Chunk, ChunkConfig, FrameFeatureMap, tokenize_video
from chunkseek.errors import DecodeError, ValidationError
from chunkseek.store import (
    AnnotationRecord,
    AnnotationSet,
    ChunkStore,
    import_frame_features,
    load_annotations,
    save_annotations,
)

from conftest import make_store


def stores_equal(a: ChunkStore, b: ChunkStore) -> bool:
    if a.video_ids() != b.video_ids() or a.dims != b.dims:
        return False
    for vid in a.video_ids():
        ca, cb = a.get_chunks(vid), b.get_chunks(vid)
        if len(ca) != len(cb):
            return False
        for x, y in zip(ca, cb):
            if x.frame_span != y.frame_span or x.tokens.tobytes() != y.tokens.tobytes():
                return False
    return True


class TestFrameFeatureIO:
    def test_roundtrip(self, rng, tmp_path):
        data = rng.standard_normal((2, 2, 2, 3)).astype(np.float32)
        path = tmp_path / "clip.frames.rvlm"
        binio.write_frame_features(path, FrameFeatureMap("clip", data))
        loaded = import_frame_features(path)
        assert loaded.video_id == "clip"
        np.testing.assert_array_equal(loaded.data, data)
        assert loaded.data.dtype == np.float32

    def test_truncated_payload(self, rng, tmp_path):
        path = tmp_path / "t.rvlm"
        binio.write_frame_features(
            path, FrameFeatureMap("t", rng.standard_normal((2, 2, 2, 3)).astype(np.float32))
        )
        blob = path.read_bytes()
        path.write_bytes(blob[:-12])  # drop one float and the checksum
        with pytest.raises(DecodeError, match="truncated"):
            import_frame_features(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.rvlm"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(DecodeError, match="magic"):
            import_frame_features(path)

    def test_version_mismatch(self, rng, tmp_path):
        path = tmp_path / "v.rvlm"
        binio.write_frame_features(
            path, FrameFeatureMap("v", rng.standard_normal((2, 2, 2, 3)).astype(np.float32))
        )
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(DecodeError, match="version"):
            import_frame_features(path)

    def test_payload_corruption_detected(self, rng, tmp_path):
        path = tmp_path / "c.rvlm"
        binio.write_frame_features(
            path, FrameFeatureMap("c", rng.standard_normal((2, 2, 2, 3)).astype(np.float32))
        )
        blob = bytearray(path.read_bytes())
        blob[40] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DecodeError, match="checksum"):
            import_frame_features(path)

    def test_full_scale_shape_tokenizes(self, tmp_path):
        # mirror of the adapter contract: T=12, 16x16 grid, dim 1024
        rng = np.random.default_rng(0)
        data = rng.standard_normal((12, 16, 16, 1024)).astype(np.float32)
        path = tmp_path / "real.rvlm"
        binio.write_frame_features(path, FrameFeatureMap("real", data))
        chunks = tokenize_video(import_frame_features(path), ChunkConfig())
        assert len(chunks) == 3
        assert all(c.token_count == 68 for c in chunks)


class TestChunkStore:
    def test_roundtrip_bitwise(self, rng, tmp_path):
        store = make_store(rng, n_videos=2, n_chunks=3)
        path = tmp_path / "s.rvlm"
        store.save(path)
        assert stores_equal(store, ChunkStore.load(path))

    def test_empty_store_roundtrip(self, tmp_path):
        path = tmp_path / "empty.rvlm"
        ChunkStore().save(path)
        loaded = ChunkStore.load(path)
        assert loaded.n_videos == 0 and loaded.dims is None

    def test_checksum_flip_rejected(self, rng, tmp_path):
        store = make_store(rng)
        path = tmp_path / "s.rvlm"
        store.save(path)
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(DecodeError, match="checksum"):
            ChunkStore.load(path)

    def test_metadata_flip_rejected(self, rng, tmp_path):
        store = make_store(rng)
        path = tmp_path / "s.rvlm"
        store.save(path)
        blob = bytearray(path.read_bytes())
        blob[16] ^= 0xFF  # inside the video directory
        path.write_bytes(bytes(blob))
        with pytest.raises(DecodeError):
            ChunkStore.load(path)

    def test_dimension_homogeneity_enforced(self, rng):
        store = make_store(rng, tokens=6, dim=5)
        bad = [Chunk("other", 0, rng.standard_normal((7, 5)).astype(np.float32), (0, 4))]
        with pytest.raises(ValidationError, match="mismatch"):
            store.add_video(bad)

    def test_duplicate_video_rejected(self, rng):
        store = make_store(rng)
        chunks = store.get_chunks("vid0")
        with pytest.raises(ValidationError, match="already"):
            store.add_video(chunks)

    def test_gapped_indices_rejected(self, rng):
        c0 = Chunk("v", 0, rng.standard_normal((4, 3)).astype(np.float32), (0, 4))
        c2 = Chunk("v", 2, rng.standard_normal((4, 3)).astype(np.float32), (4, 8))
        with pytest.raises(ValidationError, match="indices"):
            ChunkStore().add_video([c0, c2])

    def test_noncontiguous_spans_rejected(self, rng):
        c0 = Chunk("v", 0, rng.standard_normal((4, 3)).astype(np.float32), (0, 4))
        c1 = Chunk("v", 1, rng.standard_normal((4, 3)).astype(np.float32), (5, 9))
        with pytest.raises(ValidationError, match="contiguous"):
            ChunkStore().add_video([c0, c1])

    def test_unknown_video(self, rng):
        with pytest.raises(ValidationError, match="unknown video"):
            make_store(rng).get_chunks("nope")


def make_annotations(rng, n=4, dim=6, n_chunks=4):
    records = [
        AnnotationRecord(
            video_id=f"vid{i % 3}",
            question_id=f"q{i}",
            text_feature=rng.standard_normal(dim).astype(np.float32),
            ground_truth_chunks=(i % n_chunks,),
            answer_text="an answer" if i % 2 else None,
        )
        for i in range(n)
    ]
    return AnnotationSet(records)


class TestAnnotations:
    def test_roundtrip(self, rng, tmp_path, small_store):
        annots = make_annotations(rng, dim=5)
        path = tmp_path / "ann.jsonl"
        save_annotations(annots, path)
        loaded = load_annotations(path, small_store)
        assert len(loaded) == len(annots)
        for a, b in zip(annots, loaded):
            assert (a.video_id, a.question_id, a.ground_truth_chunks, a.answer_text) == (
                b.video_id,
                b.question_id,
                b.ground_truth_chunks,
                b.answer_text,
            )
            np.testing.assert_array_equal(
                a.text_feature.astype(np.float32), b.text_feature.astype(np.float32)
            )

    def test_in_range_ground_truth_accepted(self, rng, tmp_path, small_store):
        annots = AnnotationSet(
            [
                AnnotationRecord("vid0", "q0", rng.standard_normal(5), (1, 2)),
            ]
        )
        path = tmp_path / "ok.jsonl"
        save_annotations(annots, path)
        assert len(load_annotations(path, small_store)) == 1

    def test_out_of_range_ground_truth_rejected(self, rng, tmp_path, small_store):
        # small_store videos have 4 chunks; index 5 is out of range
        annots = AnnotationSet(
            [AnnotationRecord("vid0", "q0", rng.standard_normal(5), (5,))]
        )
        path = tmp_path / "bad.jsonl"
        save_annotations(annots, path)
        with pytest.raises(ValidationError, match="out of range"):
            load_annotations(path, small_store)

    def test_empty_ground_truth_rejected(self, rng):
        with pytest.raises(ValidationError, match="empty ground-truth"):
            AnnotationRecord("v", "q", rng.standard_normal(4), ())

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "noheader.jsonl"
        path.write_text('{"video_id": "v"}\n')
        with pytest.raises(DecodeError, match="header"):
            load_annotations(path)

    def test_bad_feature_row_rejected(self, rng, tmp_path, small_store):
        annots = make_annotations(rng, dim=5)
        path = tmp_path / "ann.jsonl"
        save_annotations(annots, path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace('"feature_row": 0', '"feature_row": 99')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DecodeError, match="feature_row"):
            load_annotations(path, small_store)


class TestWeightIO:
    def test_encoder_roundtrip_field_order(self, rng, tmp_path):
        from chunkseek.retrieval import QueryEncoder

        enc = QueryEncoder.initialize(5, 7, 6, rng)
        path = tmp_path / "enc.rvlm"
        binio.write_encoder(path, enc)
        loaded = binio.read_encoder(path)
        for a, b in [(enc.w1, loaded.w1), (enc.b1, loaded.b1), (enc.w2, loaded.w2), (enc.b2, loaded.b2)]:
            np.testing.assert_array_equal(a.astype(np.float32), b.astype(np.float32))

    def test_projector_roundtrip(self, rng, tmp_path):
        from chunkseek.retrieval import Projector

        proj = Projector(rng.standard_normal((9, 6)), rng.standard_normal(9))
        path = tmp_path / "proj.rvlm"
        binio.write_projector(path, proj)
        loaded = binio.read_projector(path)
        np.testing.assert_array_equal(proj.weight.astype(np.float32), loaded.weight.astype(np.float32))
        np.testing.assert_array_equal(proj.bias.astype(np.float32), loaded.bias.astype(np.float32))

    def test_kind_mismatch_rejected(self, rng, tmp_path):
        path = tmp_path / "feat.rvlm"
        binio.write_query_features(path, rng.standard_normal((3, 4)).astype(np.float32))
        with pytest.raises(DecodeError, match="kind"):
            binio.read_encoder(path)
