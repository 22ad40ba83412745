"""manualrag: local retrieval-augmented troubleshooting assistance for
technical manuals, plus the evaluation harness that measures it."""

__version__ = "0.1.0"

from .corpus import (
    AblationKind,
    Chunk,
    Document,
    KBConfiguration,
    Procedure,
    apply_ablation,
    chunk_corpus,
    chunk_document,
    generate_synthetic_corpus,
    parse_manual,
    render_manual,
)
from .embedding import (
    DeterministicHashEmbedder,
    EmbedderKind,
    EmbedderSpec,
    EmbeddingVector,
    RemoteHttpEmbedder,
    cosine_similarity,
    make_embedder,
)
from .index import (
    IndexEntry,
    IndexHandle,
    KnowledgeIndex,
    RetrievalResult,
    RetrievedChunk,
    build_index,
    index_corpus,
    load_index,
    persist_index,
)
from .llm import (
    EchoFirstSourceStub,
    FixedTextStub,
    HttpLlmBackend,
    LlmSpec,
    ScriptedStub,
    make_backend,
)
from .rag import Answer, ask, build_prompt

__all__ = [
    "AblationKind",
    "Answer",
    "Chunk",
    "DeterministicHashEmbedder",
    "Document",
    "EchoFirstSourceStub",
    "EmbedderKind",
    "EmbedderSpec",
    "EmbeddingVector",
    "FixedTextStub",
    "HttpLlmBackend",
    "IndexEntry",
    "IndexHandle",
    "KBConfiguration",
    "KnowledgeIndex",
    "LlmSpec",
    "Procedure",
    "RemoteHttpEmbedder",
    "RetrievalResult",
    "RetrievedChunk",
    "ScriptedStub",
    "apply_ablation",
    "ask",
    "build_index",
    "build_prompt",
    "chunk_corpus",
    "chunk_document",
    "cosine_similarity",
    "generate_synthetic_corpus",
    "index_corpus",
    "load_index",
    "make_backend",
    "make_embedder",
    "parse_manual",
    "persist_index",
    "render_manual",
]
