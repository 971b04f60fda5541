"""In-memory chunk bank and the annotation ingestion around it.

A ChunkStore maps video ids to their ordered chunks and enforces that every
chunk in the bank has the same (token_count, dim) shape. It is built once
and then read concurrently; persistence goes through the binary container in
``binio``. Annotations pair a query's text feature with the chunk indices a
correct answer lives in; they travel as a JSON-lines file whose header names
a sidecar query-feature binary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binio
from .chunking import Chunk
from .errors import DecodeError, ValidationError

ANNOTATION_FORMAT = "chunkseek-annotations"
ANNOTATION_VERSION = 1


class ChunkStore:
    """Ordered chunk lists per video, homogeneous in (token_count, dim)."""

    def __init__(self) -> None:
        self._entries: dict[str, list[Chunk]] = {}
        self._rep_cache: dict[str, np.ndarray] = {}
        self.dims: tuple[int, int] | None = None
        self.format_version = binio.FORMAT_VERSION

    def add_video(self, chunks: list[Chunk]) -> None:
        if not chunks:
            raise ValidationError("cannot add a video with no chunks")
        vid = chunks[0].video_id
        if vid in self._entries:
            raise ValidationError(f"video {vid!r} already present")
        dims = (chunks[0].token_count, chunks[0].dim)
        prev_end = None
        for idx, chunk in enumerate(chunks):
            if chunk.video_id != vid:
                raise ValidationError(f"mixed video ids in chunk list: {vid!r} vs {chunk.video_id!r}")
            if chunk.index != idx:
                raise ValidationError(f"video {vid!r}: chunk indices must be 0..L-1, got {chunk.index} at {idx}")
            if (chunk.token_count, chunk.dim) != dims:
                raise ValidationError(
                    f"video {vid!r}: chunk {idx} has shape {(chunk.token_count, chunk.dim)}, expected {dims}"
                )
            if prev_end is not None and chunk.frame_span[0] != prev_end:
                raise ValidationError(f"video {vid!r}: chunk {idx} span not contiguous")
            prev_end = chunk.frame_span[1]
        if self.dims is None:
            self.dims = dims
        elif dims != self.dims:
            raise ValidationError(f"store holds {self.dims} chunks, refusing mismatched {dims}")
        self._entries[vid] = list(chunks)

    def get_chunks(self, video_id: str) -> list[Chunk]:
        try:
            return self._entries[video_id]
        except KeyError:
            raise ValidationError(f"unknown video id {video_id!r}") from None

    def representations(self, video_id: str) -> np.ndarray:
        """(n_chunks, dim) float64 matrix of chunk representation vectors."""
        cached = self._rep_cache.get(video_id)
        if cached is None:
            cached = np.stack([c.representation for c in self.get_chunks(video_id)])
            self._rep_cache[video_id] = cached
        return cached

    def video_ids(self) -> list[str]:
        return list(self._entries)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._entries

    @property
    def n_videos(self) -> int:
        return len(self._entries)

    @property
    def n_chunks(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def save(self, path: str | Path) -> None:
        binio.write_chunk_store(path, self)

    @classmethod
    def load(cls, path: str | Path) -> "ChunkStore":
        return binio.read_chunk_store(path)


def import_frame_features(path: str | Path, video_id: str | None = None):
    """Read a frame-feature binary; the filename stem names the video."""
    return binio.read_frame_features(path, video_id)


@dataclass
class AnnotationRecord:
    """One evaluation query: its text feature and the relevant chunk ids."""

    video_id: str
    question_id: str
    text_feature: np.ndarray
    ground_truth_chunks: tuple[int, ...]
    answer_text: str | None = None

    def __post_init__(self) -> None:
        self.text_feature = np.asarray(self.text_feature, dtype=np.float64)
        if self.text_feature.ndim != 1 or self.text_feature.size < 1:
            raise ValidationError(f"{self.question_id}: text feature must be a non-empty vector")
        gt = tuple(sorted(int(i) for i in self.ground_truth_chunks))
        if not gt:
            raise ValidationError(f"{self.question_id}: empty ground-truth chunk set")
        if gt[0] < 0:
            raise ValidationError(f"{self.question_id}: negative ground-truth chunk index")
        if len(set(gt)) != len(gt):
            raise ValidationError(f"{self.question_id}: duplicate ground-truth chunk index")
        self.ground_truth_chunks = gt


@dataclass
class AnnotationSet:
    records: list[AnnotationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def text_dim(self) -> int:
        if not self.records:
            raise ValidationError("annotation set is empty")
        return self.records[0].text_feature.size


def _features_path_for(path: Path) -> Path:
    return path.with_name(path.stem + ".queries.rvlm")


def save_annotations(annotations: AnnotationSet, path: str | Path) -> None:
    """Write the JSONL records plus the sidecar query-feature binary."""
    path = Path(path)
    features_path = _features_path_for(path)
    features = np.stack([r.text_feature for r in annotations.records]).astype(np.float32)
    binio.write_query_features(features_path, features)
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "format": ANNOTATION_FORMAT,
            "version": ANNOTATION_VERSION,
            "features": features_path.name,
        }
        fh.write(json.dumps(header) + "\n")
        for row, rec in enumerate(annotations.records):
            fh.write(
                json.dumps(
                    {
                        "video_id": rec.video_id,
                        "question_id": rec.question_id,
                        "feature_row": row,
                        "ground_truth_chunks": list(rec.ground_truth_chunks),
                        "answer_text": rec.answer_text,
                    }
                )
                + "\n"
            )


def load_annotations(path: str | Path, store: ChunkStore | None = None) -> AnnotationSet:
    """Parse annotations; with a store, validate ground truth against it."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    if not lines:
        raise DecodeError(f"{path}: empty annotation file")

    def parse(lineno: int, line: str) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DecodeError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise DecodeError(f"{path}:{lineno}: expected a JSON object")
        return obj

    header = parse(1, lines[0])
    if header.get("format") != ANNOTATION_FORMAT:
        raise DecodeError(f"{path}: missing {ANNOTATION_FORMAT} header")
    if header.get("version") != ANNOTATION_VERSION:
        raise DecodeError(f"{path}: unsupported annotation version {header.get('version')}")
    features = binio.read_query_features(path.parent / header["features"])

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = parse(lineno, line)
        try:
            row = int(obj["feature_row"])
            video_id = str(obj["video_id"])
            question_id = str(obj["question_id"])
            gt = tuple(obj["ground_truth_chunks"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DecodeError(f"{path}:{lineno}: malformed record ({exc})") from exc
        if not 0 <= row < features.shape[0]:
            raise DecodeError(f"{path}:{lineno}: feature_row {row} out of range")
        rec = AnnotationRecord(
            video_id=video_id,
            question_id=question_id,
            text_feature=features[row],
            ground_truth_chunks=gt,
            answer_text=obj.get("answer_text"),
        )
        if store is not None:
            n_chunks = len(store.get_chunks(rec.video_id))
            bad = [i for i in rec.ground_truth_chunks if i >= n_chunks]
            if bad:
                raise ValidationError(
                    f"{path}:{lineno}: ground-truth chunks {bad} out of range for "
                    f"{rec.video_id!r} with {n_chunks} chunks"
                )
        records.append(rec)
    if not records:
        raise DecodeError(f"{path}: no annotation records")
    return AnnotationSet(records)
