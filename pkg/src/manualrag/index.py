"""In-memory knowledge index: exact top-k cosine retrieval over chunk vectors.

The index is an exact scan over a matrix, not an approximate structure:
corpora in this domain are small enough (tens of thousands of chunks) that
scan latency is negligible next to model latency, and exactness keeps the
evaluation metrics trustworthy.  Equal scores are broken by ascending
chunk_id so ranks are reproducible.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .corpus import Document, chunk_corpus
from .embedding import Embedder, EmbeddingVector
from .errors import (
    CorruptIndexFile,
    DimensionMismatch,
    DuplicateChunkId,
    VersionMismatch,
)

_MAGIC = b"KIDX"
_VERSION = 1


@dataclass(frozen=True)
class IndexEntry:
    chunk_id: str
    document_id: str
    vector: EmbeddingVector
    text: str


@dataclass(frozen=True)
class RetrievedChunk:
    chunk_id: str
    document_id: str
    score: float
    text: str


@dataclass(frozen=True)
class RetrievalResult:
    """Ranked retrieval hits, scores non-increasing, at most k entries."""

    ranked: tuple[RetrievedChunk, ...]

    def __len__(self) -> int:
        return len(self.ranked)

    def __iter__(self):
        return iter(self.ranked)

    def chunk_ids(self) -> list[str]:
        return [r.chunk_id for r in self.ranked]


class KnowledgeIndex:
    """Immutable store of chunk embeddings with metadata.

    Vectors are L2-normalized at build time and held as float32 (the
    persisted representation), so persist/load round-trips are exact and
    a reloaded index answers every query identically.
    """

    def __init__(
        self,
        ids: Sequence[str],
        document_ids: Sequence[str],
        texts: Sequence[str],
        matrix: np.ndarray,
    ) -> None:
        # Internal: callers use build_index() / load_index().
        self._ids = list(ids)
        self._document_ids = list(document_ids)
        self._texts = list(texts)
        self._matrix = matrix  # float32, rows unit-norm or zero
        self._matrix64 = matrix.astype(np.float64)
        self._row_norms = np.linalg.norm(self._matrix64, axis=1)
        self._rankable = self._row_norms > 0.0
        self._by_id = {cid: i for i, cid in enumerate(self._ids)}

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> Optional[int]:
        if not self._ids:
            return None
        return int(self._matrix.shape[1])

    def entry(self, chunk_id: str) -> IndexEntry:
        i = self._by_id[chunk_id]
        return IndexEntry(
            chunk_id=self._ids[i],
            document_id=self._document_ids[i],
            vector=EmbeddingVector(self._matrix64[i]),
            text=self._texts[i],
        )

    def chunk_ids(self) -> list[str]:
        return list(self._ids)

    def document_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for doc_id in self._document_ids:
            counts[doc_id] = counts.get(doc_id, 0) + 1
        return counts

    def entries_for_document(self, document_id: str) -> list[IndexEntry]:
        return [
            self.entry(cid)
            for cid, did in zip(self._ids, self._document_ids)
            if did == document_id
        ]

    def retrieve(
        self,
        query_vec: EmbeddingVector,
        k: int,
        document_filter: Optional[str] = None,
    ) -> RetrievalResult:
        """Return the k highest-cosine entries, ties broken by chunk_id.

        Zero-norm entries are stored but never ranked; a zero-norm query
        scores 0 against everything, so ranking degenerates to the tie rule.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if not self._ids:
            return RetrievalResult(ranked=())
        if query_vec.dim != self._matrix.shape[1]:
            raise DimensionMismatch(
                f"query dim {query_vec.dim} != index dim {self._matrix.shape[1]}"
            )

        q = query_vec.components
        qnorm = float(np.linalg.norm(q))
        scores = np.zeros(len(self._ids))
        if qnorm > 0.0:
            raw = self._matrix64 @ q
            mask = self._rankable
            scores[mask] = raw[mask] / (self._row_norms[mask] * qnorm)
            np.clip(scores, -1.0, 1.0, out=scores)

        candidates = [
            i
            for i in range(len(self._ids))
            if self._rankable[i]
            and (document_filter is None or self._document_ids[i] == document_filter)
        ]
        candidates.sort(key=lambda i: (-scores[i], self._ids[i]))
        top = candidates[:k]
        return RetrievalResult(
            ranked=tuple(
                RetrievedChunk(
                    chunk_id=self._ids[i],
                    document_id=self._document_ids[i],
                    score=float(scores[i]),
                    text=self._texts[i],
                )
                for i in top
            )
        )


def build_index(entries: Iterable[IndexEntry]) -> KnowledgeIndex:
    """Build an immutable index; vectors are normalized and stored as float32."""
    entries = list(entries)
    ids = []
    doc_ids = []
    texts = []
    seen = set()
    dim: Optional[int] = None
    rows = []
    for e in entries:
        if e.chunk_id in seen:
            raise DuplicateChunkId(f"duplicate chunk id {e.chunk_id!r}")
        seen.add(e.chunk_id)
        if dim is None:
            dim = e.vector.dim
        elif e.vector.dim != dim:
            raise DimensionMismatch(
                f"entry {e.chunk_id!r} has dim {e.vector.dim}, index dim {dim}"
            )
        v = e.vector.components
        norm = np.linalg.norm(v)
        rows.append((v / norm if norm > 0.0 else v).astype(np.float32))
        ids.append(e.chunk_id)
        doc_ids.append(e.document_id)
        texts.append(e.text)
    matrix = np.stack(rows) if rows else np.zeros((0, 0), dtype=np.float32)
    return KnowledgeIndex(ids, doc_ids, texts, matrix)


def index_corpus(
    corpus: Sequence[Document],
    chunk_size: int,
    embedder: Embedder,
) -> KnowledgeIndex:
    """Chunk every document, embed every chunk, and index the result."""
    entries = [
        IndexEntry(
            chunk_id=c.chunk_id,
            document_id=c.document_id,
            vector=embedder.embed(c.text),
            text=c.text,
        )
        for c in chunk_corpus(corpus, chunk_size)
    ]
    return build_index(entries)


# --- persistence ------------------------------------------------------------


def persist_index(index: KnowledgeIndex) -> bytes:
    """Serialize to the versioned binary format (header, f32 vectors, metadata)."""
    count = len(index)
    dim = index.dim or 0
    parts = [_MAGIC, struct.pack("<III", _VERSION, dim, count)]
    parts.append(index._matrix.astype("<f4").tobytes())
    for cid in index._ids:
        i = index._by_id[cid]
        for field in (index._ids[i], index._document_ids[i], index._texts[i]):
            raw = field.encode("utf-8")
            parts.append(struct.pack("<I", len(raw)))
            parts.append(raw)
    return b"".join(parts)


def load_index(data: bytes) -> KnowledgeIndex:
    """Inverse of persist_index; the reloaded index is query-equivalent."""
    if len(data) < 16:
        raise CorruptIndexFile("index file shorter than its header")
    if data[:4] != _MAGIC:
        raise CorruptIndexFile("bad magic bytes")
    version, dim, count = struct.unpack("<III", data[4:16])
    if version != _VERSION:
        raise VersionMismatch(f"index format version {version}, expected {_VERSION}")

    offset = 16
    vec_bytes = count * dim * 4
    if len(data) < offset + vec_bytes:
        raise CorruptIndexFile("truncated vector block")
    matrix = np.frombuffer(
        data[offset : offset + vec_bytes], dtype="<f4"
    ).reshape(count, dim).astype(np.float32)
    offset += vec_bytes

    def read_str() -> str:
        nonlocal offset
        if len(data) < offset + 4:
            raise CorruptIndexFile("truncated metadata length")
        (n,) = struct.unpack("<I", data[offset : offset + 4])
        offset += 4
        if len(data) < offset + n:
            raise CorruptIndexFile("truncated metadata payload")
        raw = data[offset : offset + n]
        offset += n
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptIndexFile(f"metadata not UTF-8: {exc}") from exc

    ids = []
    doc_ids = []
    texts = []
    for _ in range(count):
        ids.append(read_str())
        doc_ids.append(read_str())
        texts.append(read_str())
    if offset != len(data):
        raise CorruptIndexFile(f"{len(data) - offset} trailing bytes")
    if len(set(ids)) != len(ids):
        raise CorruptIndexFile("duplicate chunk ids in file")
    return KnowledgeIndex(ids, doc_ids, texts, matrix)


class IndexHandle:
    """Versioned, atomically swappable reference to the live index."""

    def __init__(self, index: KnowledgeIndex) -> None:
        self._lock = threading.Lock()
        self._index = index
        self._version = 1

    def get(self) -> KnowledgeIndex:
        with self._lock:
            return self._index

    @property
    def version(self) -> int:
        with self._lock:
            return self._version

    def swap(self, new_index: KnowledgeIndex) -> int:
        with self._lock:
            self._index = new_index
            self._version += 1
            return self._version
