"""HTTP service wrapping the core package.

Endpoints cover the operator path (ask with sources, browse the KB) and the
evaluation path (run a grid, fetch its report).  Answers always carry their
sources; an operator must be able to cross-validate every recommendation
before acting on it.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .config import ServiceConfig
from .corpus import (
    AblationKind,
    Chunk,
    Document,
    chunk_document,
    parse_manual,
)
from .embedding import Embedder, make_embedder
from .errors import (
    BackendMalformed,
    BackendUnavailable,
    ConfigInvalid,
    EmptyQuestion,
    ManualRagError,
    UnknownProcedure,
)
from .index import IndexHandle, KnowledgeIndex, index_corpus, load_index
from .llm import LlmBackend, is_stub_endpoint, make_backend
from .rag import ask
from .evaluation import (
    ExperimentGrid,
    load_questions,
    questions_for_corpus,
    run_grid,
)

_ERROR_STATUS = {
    EmptyQuestion: 400,
    ConfigInvalid: 400,
    UnknownProcedure: 404,
    BackendUnavailable: 502,
    BackendMalformed: 502,
}


# --- wire models ------------------------------------------------------------


class AskRequest(BaseModel):
    question: str
    document_id: Optional[str] = None
    k: Optional[int] = Field(default=None, ge=1)


class SourceModel(BaseModel):
    chunk_id: str
    document_id: str
    score: float
    text: str


class AskResponse(BaseModel):
    text: str
    sources: list[SourceModel]
    latency_ms: float
    model: str
    prompt: str


class HealthResponse(BaseModel):
    status: str
    version: str
    stub_mode: bool


class KbStatsResponse(BaseModel):
    documents: int
    chunks: int
    dim: Optional[int]
    chunk_size: int
    index_version: int


class DocumentSummary(BaseModel):
    document_id: str
    title: str
    procedures: int
    chunks: int


class ChunkModel(BaseModel):
    chunk_id: str
    ordinal: int
    char_start: int
    char_end: int
    text: str


class RebuildRequest(BaseModel):
    chunk_size: Optional[int] = Field(default=None, ge=50)


class EvalRunRequest(BaseModel):
    question_file: Optional[str] = None
    n_topics: int = Field(default=4, ge=1)
    seed: int = 0
    top_p_values: Optional[list[float]] = None
    chunk_sizes: Optional[list[int]] = None
    kb: list[str] = ["full", "no_response", "no_entry", "no_kb"]
    repetitions_full_kb: int = Field(default=2, ge=1)
    repetitions_ablated: int = Field(default=1, ge=1)


class EvalRunResponse(BaseModel):
    report_id: str
    planned: int
    executed: int
    skipped: int
    failed: int


# --- state ------------------------------------------------------------------


class ServiceState:
    def __init__(
        self,
        config: ServiceConfig,
        corpus: list[Document],
        embedder: Embedder,
        backend: LlmBackend,
    ) -> None:
        self.config = config
        self.corpus = corpus
        self.embedder = embedder
        self.backend = backend
        self.chunk_size = config.chunk_size
        self.chunks_by_doc: dict[str, list[Chunk]] = {}
        self.rebuild_lock = threading.Lock()
        self.eval_counter = 0
        index = self._build_index(corpus, self.chunk_size)
        self.handle = IndexHandle(index)

    def _build_index(self, corpus: list[Document], chunk_size: int) -> KnowledgeIndex:
        self.chunks_by_doc = {
            doc.document_id: chunk_document(doc, chunk_size) for doc in corpus
        }
        return index_corpus(corpus, chunk_size, self.embedder)

    def rebuild(self, chunk_size: Optional[int]) -> None:
        # Exclusive: concurrent rebuilds would race on chunks_by_doc.
        with self.rebuild_lock:
            if chunk_size is not None:
                self.chunk_size = chunk_size
            new_index = self._build_index(self.corpus, self.chunk_size)
            self.handle.swap(new_index)

    def titles(self) -> dict[str, str]:
        return {doc.document_id: doc.title for doc in self.corpus}


def load_corpus_dir(corpus_dir: Path, corpus_format: str) -> list[Document]:
    """Parse every manual file in a directory, sorted by name for stable ids."""
    suffix = ".xml" if corpus_format == "xml" else ".txt"
    corpus = []
    for path in sorted(corpus_dir.glob(f"*{suffix}")):
        corpus.append(
            parse_manual(
                path.read_bytes(),
                format=corpus_format,
                document_id=None if corpus_format == "xml" else path.stem,
            )
        )
    return corpus


def create_app(
    config: ServiceConfig,
    corpus: Optional[list[Document]] = None,
    embedder: Optional[Embedder] = None,
    backend: Optional[LlmBackend] = None,
) -> FastAPI:
    """Build the service; corpus/embedder/backend may be injected for tests."""
    config.validate()
    if corpus is None:
        if config.corpus_dir is not None:
            corpus = load_corpus_dir(config.corpus_dir, config.corpus_format)
        else:
            corpus = []
    embedder = embedder or make_embedder(config.embedder)
    backend = backend or make_backend(
        config.llm, max_concurrency=config.concurrency_limit
    )
    state = ServiceState(config, corpus, embedder, backend)
    if not corpus and config.index_path and config.index_path.exists():
        state.handle.swap(load_index(config.index_path.read_bytes()))

    app = FastAPI(title="manualrag", version=__version__)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ManualRagError)
    async def handle_domain_error(request: Request, exc: ManualRagError):
        status = 500
        for cls, code in _ERROR_STATUS.items():
            if isinstance(exc, cls):
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(
            status="ok",
            version=__version__,
            stub_mode=is_stub_endpoint(state.backend.spec.endpoint),
        )

    @app.post("/ask", response_model=AskResponse)
    def ask_endpoint(body: AskRequest) -> AskResponse:
        context_title = (
            state.titles().get(body.document_id) if body.document_id else None
        )
        answer = ask(
            body.question,
            state.handle.get(),
            state.embedder,
            state.backend,
            k=body.k or state.config.k,
            document_filter=body.document_id,
            context_title=context_title,
        )
        return AskResponse(
            text=answer.text,
            sources=[
                SourceModel(
                    chunk_id=s.chunk_id,
                    document_id=s.document_id,
                    score=s.score,
                    text=s.text,
                )
                for s in answer.sources
            ],
            latency_ms=answer.latency_ms,
            model=answer.llm.model_name,
            prompt=answer.prompt,
        )

    @app.get("/kb/stats", response_model=KbStatsResponse)
    def kb_stats() -> KbStatsResponse:
        index = state.handle.get()
        return KbStatsResponse(
            documents=len(state.corpus),
            chunks=len(index),
            dim=index.dim,
            chunk_size=state.chunk_size,
            index_version=state.handle.version,
        )

    @app.post("/kb/rebuild", response_model=KbStatsResponse)
    def kb_rebuild(body: RebuildRequest) -> KbStatsResponse:
        state.rebuild(body.chunk_size)
        return kb_stats()

    @app.get("/kb/documents", response_model=list[DocumentSummary])
    def kb_documents() -> list[DocumentSummary]:
        return [
            DocumentSummary(
                document_id=doc.document_id,
                title=doc.title,
                procedures=len(doc.procedures),
                chunks=len(state.chunks_by_doc.get(doc.document_id, [])),
            )
            for doc in state.corpus
        ]

    @app.get("/kb/documents/{document_id}/chunks", response_model=list[ChunkModel])
    def kb_document_chunks(document_id: str) -> list[ChunkModel]:
        if document_id not in state.chunks_by_doc:
            raise UnknownProcedure(f"unknown document {document_id!r}")
        return [
            ChunkModel(
                chunk_id=c.chunk_id,
                ordinal=c.ordinal,
                char_start=c.char_start,
                char_end=c.char_end,
                text=c.text,
            )
            for c in state.chunks_by_doc[document_id]
        ]

    @app.post("/eval/run", response_model=EvalRunResponse)
    def eval_run(body: EvalRunRequest) -> EvalRunResponse:
        if body.question_file:
            questions = load_questions(body.question_file)
        else:
            questions = questions_for_corpus(
                state.corpus, n_topics=body.n_topics, seed=body.seed
            )
        grid = ExperimentGrid(
            llms=(state.backend.spec,),
            top_p_values=tuple(body.top_p_values or [state.backend.spec.top_p]),
            chunk_sizes=tuple(body.chunk_sizes or [state.chunk_size]),
            questions=tuple(questions),
            repetitions_full_kb=body.repetitions_full_kb,
            repetitions_ablated=body.repetitions_ablated,
            k=state.config.k,
        )
        state.eval_counter += 1
        report_id = f"run-{state.eval_counter:04d}"
        out_dir = state.config.eval_dir / report_id
        outcome = run_grid(
            grid,
            state.corpus,
            out_dir,
            kb_kinds=tuple(AblationKind(kind) for kind in body.kb),
            embedder=state.embedder,
            backend_factory=lambda spec: state.backend,
        )
        return EvalRunResponse(
            report_id=report_id,
            planned=outcome.planned,
            executed=outcome.executed,
            skipped=outcome.skipped,
            failed=outcome.failed,
        )

    @app.get("/eval/report/{report_id}")
    def eval_report(report_id: str):
        report_path = state.config.eval_dir / report_id / "report.json"
        if not report_path.exists():
            raise UnknownProcedure(f"no report {report_id!r}")
        return json.loads(report_path.read_text(encoding="utf-8"))

    return app
