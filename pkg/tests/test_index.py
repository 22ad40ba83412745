import math
import random

import pytest

from manualrag import (
    EmbeddingVector,
    IndexEntry,
    IndexHandle,
    build_index,
    load_index,
    persist_index,
)
from manualrag.errors import (
    CorruptIndexFile,
    DimensionMismatch,
    DuplicateChunkId,
    VersionMismatch,
)


def make_entries(n, dim=32, seed=0, documents=5):
    rng = random.Random(seed)
    entries = []
    for i in range(n):
        entries.append(
            IndexEntry(
                chunk_id=f"doc-{i % documents:03d}:{i:05d}",
                document_id=f"doc-{i % documents:03d}",
                vector=EmbeddingVector([rng.uniform(-1, 1) for _ in range(dim)]),
                text=f"chunk text {i}",
            )
        )
    return entries


def brute_force_ranking(index, query, k, document_filter=None):
    """Full-scan oracle over the stored entries: per-entry fsum cosine,
    documented tie rule.  Reads vectors through the public accessor so it
    ranks exactly what the index holds."""
    scored = []
    for chunk_id in index.chunk_ids():
        entry = index.entry(chunk_id)
        if document_filter is not None and entry.document_id != document_filter:
            continue
        components = [float(x) for x in entry.vector.components]
        norm = math.sqrt(math.fsum(x * x for x in components))
        qnorm = math.sqrt(math.fsum(x * x for x in query))
        if norm == 0.0:
            continue  # zero vectors are excluded from ranking
        if qnorm == 0.0:
            score = 0.0
        else:
            score = math.fsum(x * y for x, y in zip(components, query)) / (norm * qnorm)
            score = max(-1.0, min(1.0, score))
        scored.append((entry.chunk_id, score))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def test_empty_index_answers_empty():
    index = build_index([])
    assert len(index) == 0
    result = index.retrieve(EmbeddingVector.zero(16), k=4)
    assert len(result) == 0


def test_thousand_entries_all_retrievable_by_id():
    entries = make_entries(1000)
    index = build_index(entries)
    assert len(index) == 1000
    for e in entries[::97]:
        assert index.entry(e.chunk_id).text == e.text


def test_duplicate_chunk_id_rejected():
    entries = make_entries(2)
    clash = IndexEntry(
        chunk_id=entries[0].chunk_id,
        document_id="other",
        vector=entries[1].vector,
        text="x",
    )
    with pytest.raises(DuplicateChunkId):
        build_index(entries + [clash])


def test_dimension_mismatch_on_build_and_query():
    entries = make_entries(3, dim=32)
    with pytest.raises(DimensionMismatch):
        build_index(
            entries
            + [
                IndexEntry(
                    chunk_id="odd",
                    document_id="d",
                    vector=EmbeddingVector.zero(16),
                    text="x",
                )
            ]
        )
    index = build_index(entries)
    with pytest.raises(DimensionMismatch):
        index.retrieve(EmbeddingVector.zero(16), k=1)


def test_retrieval_matches_brute_force_500_entries_20_queries():
    index = build_index(make_entries(500, seed=7))
    rng = random.Random(8)
    for _ in range(20):
        query = [rng.uniform(-1, 1) for _ in range(32)]
        result = index.retrieve(EmbeddingVector(query), k=4)
        expected = brute_force_ranking(index, query, k=4)
        assert result.chunk_ids() == [cid for cid, _ in expected]
        for got, (_, want_score) in zip(result.ranked, expected):
            assert got.score == pytest.approx(want_score, abs=1e-9)


def test_exact_stored_vector_scores_one():
    dim = 24
    entries = []
    for i in range(dim):
        basis = [0.0] * dim
        basis[i] = 1.0
        entries.append(
            IndexEntry(
                chunk_id=f"e:{i:05d}",
                document_id="d",
                vector=EmbeddingVector(basis),
                text=f"basis {i}",
            )
        )
    index = build_index(entries)
    query = [0.0] * dim
    query[5] = 1.0
    result = index.retrieve(EmbeddingVector(query), k=1)
    assert result.ranked[0].chunk_id == "e:00005"
    assert result.ranked[0].score == 1.0


def test_document_filter_restricts_results():
    index = build_index(make_entries(60, documents=4))
    query = EmbeddingVector([1.0] + [0.0] * 31)
    result = index.retrieve(query, k=10, document_filter="doc-002")
    assert len(result) == 10
    assert all(r.document_id == "doc-002" for r in result)


def test_k_larger_than_index_returns_all():
    index = build_index(make_entries(3))
    result = index.retrieve(EmbeddingVector([1.0] + [0.0] * 31), k=4)
    assert len(result) == 3


def test_zero_norm_entries_stored_but_never_ranked():
    entries = make_entries(4)
    entries.append(
        IndexEntry(
            chunk_id="zzz:empty",
            document_id="d",
            vector=EmbeddingVector.zero(32),
            text="",
        )
    )
    index = build_index(entries)
    assert index.entry("zzz:empty").text == ""
    result = index.retrieve(EmbeddingVector([1.0] + [0.0] * 31), k=10)
    assert "zzz:empty" not in result.chunk_ids()


def test_equal_scores_tie_break_by_ascending_chunk_id():
    shared = EmbeddingVector([1.0, 1.0, 0.0] + [0.0] * 29)
    entries = [
        IndexEntry(chunk_id=cid, document_id="d", vector=shared, text=cid)
        for cid in ("m:2", "m:0", "m:1")
    ]
    index = build_index(entries)
    result = index.retrieve(EmbeddingVector([1.0] + [0.0] * 31), k=3)
    assert result.chunk_ids() == ["m:0", "m:1", "m:2"]


def test_top_j_prefix_equals_j_result():
    entries = make_entries(40, seed=3)
    index = build_index(entries)
    query = EmbeddingVector([random.Random(4).uniform(-1, 1) for _ in range(32)])
    full = index.retrieve(query, k=8).chunk_ids()
    for j in range(1, 9):
        assert index.retrieve(query, k=j).chunk_ids() == full[:j]


def test_zero_query_ranks_by_tie_rule():
    entries = make_entries(5)
    index = build_index(entries)
    result = index.retrieve(EmbeddingVector.zero(32), k=3)
    assert result.chunk_ids() == sorted(e.chunk_id for e in entries)[:3]
    assert all(r.score == 0.0 for r in result)


# --- persistence -----------------------------------------------------------------


def test_persist_load_round_trip_is_query_equivalent():
    entries = make_entries(500, seed=7)
    index = build_index(entries)
    reloaded = load_index(persist_index(index))
    rng = random.Random(8)
    for _ in range(20):
        query = EmbeddingVector([rng.uniform(-1, 1) for _ in range(32)])
        original = index.retrieve(query, k=4)
        again = reloaded.retrieve(query, k=4)
        assert original == again


def test_persist_load_empty_index():
    reloaded = load_index(persist_index(build_index([])))
    assert len(reloaded) == 0


def test_truncated_bytes_rejected():
    data = persist_index(build_index(make_entries(10)))
    with pytest.raises(CorruptIndexFile):
        load_index(data[: len(data) // 2])
    with pytest.raises(CorruptIndexFile):
        load_index(data[:10])


def test_bad_magic_rejected():
    data = persist_index(build_index(make_entries(2)))
    with pytest.raises(CorruptIndexFile):
        load_index(b"XXXX" + data[4:])


def test_version_mismatch_rejected():
    data = bytearray(persist_index(build_index(make_entries(2))))
    data[4] = 99  # version field
    with pytest.raises(VersionMismatch):
        load_index(bytes(data))


def test_trailing_garbage_rejected():
    data = persist_index(build_index(make_entries(2)))
    with pytest.raises(CorruptIndexFile):
        load_index(data + b"extra")


def test_index_handle_swaps_atomically_and_versions():
    first = build_index(make_entries(2))
    second = build_index(make_entries(3))
    handle = IndexHandle(first)
    assert handle.get() is first
    assert handle.version == 1
    handle.swap(second)
    assert handle.get() is second
    assert handle.version == 2


def test_index_corpus_builds_from_documents(small_corpus, hash_embedder):
    from manualrag import chunk_corpus, index_corpus

    index = index_corpus(small_corpus, 400, hash_embedder)
    assert len(index) == len(chunk_corpus(small_corpus, 400))
    assert index.dim == 64
