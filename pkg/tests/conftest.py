import numpy as np
import pytest

from chunkseek.chunking import Chunk, ChunkConfig, FrameFeatureMap, tokenize_video
from chunkseek.store import ChunkStore


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_frame_map(rng, frames=12, h=16, w=16, dim=8, video_id="vid"):
    data = rng.standard_normal((frames, h, w, dim)).astype(np.float32)
    return FrameFeatureMap(video_id, data)


def make_store(rng, n_videos=3, n_chunks=4, tokens=6, dim=5):
    """A small store with random float32 chunk tokens."""
    store = ChunkStore()
    for vi in range(n_videos):
        vid = f"vid{vi}"
        chunks = [
            Chunk(
                vid,
                ci,
                rng.standard_normal((tokens, dim)).astype(np.float32),
                (ci * 4, (ci + 1) * 4),
            )
            for ci in range(n_chunks)
        ]
        store.add_video(chunks)
    return store


@pytest.fixture
def small_store(rng):
    return make_store(rng)


@pytest.fixture
def default_cfg():
    return ChunkConfig()
