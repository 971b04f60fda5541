"""Binary interchange format for tensors, chunk stores, and weights.

All files are little-endian and share a 12-byte prelude: the 4-byte magic
``RVLM``, a u32 format version, and a u32 record kind. Tensor records
(frame features, query features, encoder and projector weights) follow with
kind-specific u32 shape fields, a contiguous float32 payload, and a u64
FNV-1a checksum of the payload bytes. The chunk-store container (kind 1)
holds per-video metadata before its payload and checksums everything after
the prelude.

Record kinds:
  0  frame features   shape (frames, grid_h, grid_w, dim)
  1  chunk store      container, see ``write_chunk_store``
  2  query features   shape (count, text_dim)
  3  query encoder    shapes (text_dim, hidden_dim, vision_dim); payload
                      W1, b1, W2, b2 in that order
  4  projector        shapes (vision_dim, out_dim); payload P then b
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DecodeError
from .kernels import fnv1a64

MAGIC = b"RVLM"
FORMAT_VERSION = 1

KIND_FRAME_FEATURES = 0
KIND_CHUNK_STORE = 1
KIND_QUERY_FEATURES = 2
KIND_QUERY_ENCODER = 3
KIND_PROJECTOR = 4

_PRELUDE = struct.Struct("<4sII")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _pack_prelude(kind: int) -> bytes:
    return _PRELUDE.pack(MAGIC, FORMAT_VERSION, kind)


class _Reader:
    """Cursor over a fully-read file with truncation-aware accessors."""

    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise DecodeError(f"{self.path}: truncated {what}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def u64(self, what: str) -> int:
        return _U64.unpack(self.take(8, what))[0]

    def expect_consumed(self) -> None:
        if self.pos != len(self.blob):
            raise DecodeError(
                f"{self.path}: {len(self.blob) - self.pos} unexpected trailing bytes"
            )


def _open_record(path: Path, expected_kind: int) -> _Reader:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    rd = _Reader(blob, path)
    magic = rd.take(4, "header")
    if magic != MAGIC:
        raise DecodeError(f"{path}: bad magic {magic!r}, not a RVLM file")
    version = rd.u32("header")
    if version != FORMAT_VERSION:
        raise DecodeError(f"{path}: unsupported format version {version}")
    kind = rd.u32("header")
    if kind != expected_kind:
        raise DecodeError(f"{path}: record kind {kind}, expected {expected_kind}")
    return rd


def _write_tensor_record(path: Path, kind: int, shape: tuple[int, ...], payload: np.ndarray) -> None:
    flat = np.ascontiguousarray(payload, dtype=np.float32).reshape(-1)
    body = flat.tobytes()
    with open(path, "wb") as fh:
        fh.write(_pack_prelude(kind))
        for s in shape:
            fh.write(_U32.pack(s))
        fh.write(body)
        fh.write(_U64.pack(fnv1a64(body)))


def _read_tensor_record(
    path: Path, kind: int, n_shape: int, count_fn=None
) -> tuple[tuple[int, ...], np.ndarray]:
    rd = _open_record(path, kind)
    shape = tuple(rd.u32("shape field") for _ in range(n_shape))
    if count_fn is not None:
        count = count_fn(shape)
    else:
        count = 1
        for s in shape:
            count *= s
    body = rd.take(count * 4, "payload")
    stored = rd.u64("checksum")
    rd.expect_consumed()
    if fnv1a64(body) != stored:
        raise DecodeError(f"{path}: payload checksum mismatch")
    return shape, np.frombuffer(body, dtype=np.dtype("<f4")).copy()


# -- frame features (kind 0) -------------------------------------------------


def write_frame_features(path: str | Path, frames) -> None:
    """Serialize a FrameFeatureMap; the video id is carried by the filename."""
    data = frames.data
    _write_tensor_record(Path(path), KIND_FRAME_FEATURES, data.shape, data)


def read_frame_features(path: str | Path, video_id: str | None = None):
    from .chunking import FrameFeatureMap

    path = Path(path)
    shape, flat = _read_tensor_record(path, KIND_FRAME_FEATURES, 4)
    return FrameFeatureMap(video_id or path.name.split(".")[0], flat.reshape(shape))


# -- query features (kind 2) -------------------------------------------------


def write_query_features(path: str | Path, features: np.ndarray) -> None:
    features = np.asarray(features)
    if features.ndim != 2:
        raise DecodeError("query features must be a (count, text_dim) matrix")
    _write_tensor_record(Path(path), KIND_QUERY_FEATURES, features.shape, features)


def read_query_features(path: str | Path) -> np.ndarray:
    shape, flat = _read_tensor_record(Path(path), KIND_QUERY_FEATURES, 2)
    return flat.reshape(shape)


# -- encoder weights (kind 3) ------------------------------------------------


def write_encoder(path: str | Path, encoder) -> None:
    shape = (encoder.text_dim, encoder.hidden_dim, encoder.vision_dim)
    payload = np.concatenate(
        [encoder.w1.ravel(), encoder.b1.ravel(), encoder.w2.ravel(), encoder.b2.ravel()]
    )
    _write_tensor_record(Path(path), KIND_QUERY_ENCODER, shape, payload)


def read_encoder(path: str | Path):
    from .retrieval import QueryEncoder

    def count(shape):
        t, h, v = shape
        return h * t + h + v * h + v

    (text_dim, hidden_dim, vision_dim), flat = _read_tensor_record(
        Path(path), KIND_QUERY_ENCODER, 3, count
    )
    flat = flat.astype(np.float64)
    sizes = [hidden_dim * text_dim, hidden_dim, vision_dim * hidden_dim, vision_dim]
    offs = np.cumsum([0] + sizes)
    return QueryEncoder(
        w1=flat[offs[0] : offs[1]].reshape(hidden_dim, text_dim),
        b1=flat[offs[1] : offs[2]],
        w2=flat[offs[2] : offs[3]].reshape(vision_dim, hidden_dim),
        b2=flat[offs[3] : offs[4]],
    )


# -- projector weights (kind 4) ----------------------------------------------


def write_projector(path: str | Path, projector) -> None:
    shape = (projector.vision_dim, projector.out_dim)
    payload = np.concatenate([projector.weight.ravel(), projector.bias.ravel()])
    _write_tensor_record(Path(path), KIND_PROJECTOR, shape, payload)


def read_projector(path: str | Path):
    from .retrieval import Projector

    def count(shape):
        v, o = shape
        return o * v + o

    (vision_dim, out_dim), flat = _read_tensor_record(Path(path), KIND_PROJECTOR, 2, count)
    flat = flat.astype(np.float64)
    split = out_dim * vision_dim
    return Projector(weight=flat[:split].reshape(out_dim, vision_dim), bias=flat[split:])


# -- chunk store container (kind 1) ------------------------------------------


def write_chunk_store(path: str | Path, store) -> None:
    """Layout after the prelude:

    u32 n_videos, u32 tokens_per_chunk, u32 dim,
    per video: u32 id_len, id bytes (UTF-8), u32 n_chunks,
               n_chunks x (u32 span_start, u32 span_end),
    float32 payload of all token matrices in video/chunk order,
    u64 FNV-1a checksum over everything between prelude and checksum.
    """
    toks, dim = store.dims if store.dims is not None else (0, 0)
    meta = bytearray()
    payloads = []
    video_ids = store.video_ids()
    meta += _U32.pack(len(video_ids)) + _U32.pack(toks) + _U32.pack(dim)
    for vid in video_ids:
        chunks = store.get_chunks(vid)
        vid_bytes = vid.encode("utf-8")
        meta += _U32.pack(len(vid_bytes)) + vid_bytes + _U32.pack(len(chunks))
        for chunk in chunks:
            meta += _U32.pack(chunk.frame_span[0]) + _U32.pack(chunk.frame_span[1])
            payloads.append(np.ascontiguousarray(chunk.tokens, dtype=np.float32))
    body = bytes(meta) + b"".join(p.tobytes() for p in payloads)
    with open(path, "wb") as fh:
        fh.write(_pack_prelude(KIND_CHUNK_STORE))
        fh.write(body)
        fh.write(_U64.pack(fnv1a64(body)))


def read_chunk_store(path: str | Path):
    from .chunking import Chunk
    from .store import ChunkStore

    path = Path(path)
    rd = _open_record(path, KIND_CHUNK_STORE)
    if len(rd.blob) < rd.pos + 8:
        raise DecodeError(f"{path}: truncated checksum")
    body = rd.blob[rd.pos : -8]
    stored = _U64.unpack(rd.blob[-8:])[0]
    if fnv1a64(body) != stored:
        raise DecodeError(f"{path}: store checksum mismatch")

    inner = _Reader(body, path)
    n_videos = inner.u32("video count")
    toks = inner.u32("token count")
    dim = inner.u32("feature dim")
    directory: list[tuple[str, list[tuple[int, int]]]] = []
    for _ in range(n_videos):
        id_len = inner.u32("video id length")
        try:
            vid = inner.take(id_len, "video id").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{path}: undecodable video id") from exc
        n_chunks = inner.u32("chunk count")
        spans = [(inner.u32("span"), inner.u32("span")) for _ in range(n_chunks)]
        directory.append((vid, spans))

    total_chunks = sum(len(spans) for _, spans in directory)
    expected = total_chunks * toks * dim * 4
    remaining = len(body) - inner.pos
    if remaining != expected:
        raise DecodeError(
            f"{path}: token payload is {remaining} bytes, expected {expected}"
        )
    flat = np.frombuffer(body, dtype=np.dtype("<f4"), offset=inner.pos)

    store = ChunkStore()
    cursor = 0
    per_chunk = toks * dim
    for vid, spans in directory:
        chunks = []
        for idx, span in enumerate(spans):
            tokens = flat[cursor : cursor + per_chunk].reshape(toks, dim).copy()
            cursor += per_chunk
            chunks.append(Chunk(vid, idx, tokens, span))
        store.add_video(chunks)
    return store
