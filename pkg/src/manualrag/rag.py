"""The answer path: embed the question, retrieve supporting chunks, assemble
the augmented prompt, call the model, and return an answer that always
carries the sources that motivated it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

from .embedding import Embedder
from .errors import EmptyQuestion
from .index import KnowledgeIndex, RetrievalResult, RetrievedChunk
from .llm import LlmBackend, LlmSpec

DEFAULT_K = 4

PROMPT_HEADER = (
    "You are assisting an operator of an industrial system. "
    "Use ONLY the reference material below to answer.\n\n"
)
NO_MATERIAL_BLOCK = "NO REFERENCE MATERIAL FOUND.\n\n"
PROMPT_FOOTER = (
    "QUESTION: {question}\nAnswer with the troubleshooting steps, citing source ids."
)


@dataclass(frozen=True)
class Answer:
    """A model answer plus everything needed to cross-validate it."""

    text: str
    sources: tuple[RetrievedChunk, ...]
    latency_ms: float
    llm: LlmSpec
    prompt: str


def build_prompt(
    question: str,
    sources: Union[RetrievalResult, Sequence[RetrievedChunk]],
    context_title: Optional[str] = None,
) -> str:
    """Assemble the frozen augmented-prompt template.

    Sources appear in rank order, each tagged with its chunk id for
    citation; with no sources the template states that explicitly instead
    of leaving the model to guess.  When the operator named a context
    document, its title is injected just before the question.
    """
    ranked = sources.ranked if isinstance(sources, RetrievalResult) else tuple(sources)
    parts = [PROMPT_HEADER]
    if ranked:
        for src in ranked:
            parts.append(f"[SOURCE {src.chunk_id}]\n{src.text}\n\n")
    else:
        parts.append(NO_MATERIAL_BLOCK)
    if context_title is not None:
        parts.append(f"CONTEXT DOCUMENT: {context_title}\n")
    parts.append(PROMPT_FOOTER.format(question=question))
    return "".join(parts)


def ask(
    question: str,
    index: KnowledgeIndex,
    embedder: Embedder,
    backend: LlmBackend,
    k: int = DEFAULT_K,
    document_filter: Optional[str] = None,
    context_title: Optional[str] = None,
    clock: Callable[[], float] = time.monotonic,
) -> Answer:
    """Answer a question end to end, timing the whole exchange.

    Latency covers everything from request receipt to the last byte of the
    model response.  An empty index still produces an answer (the prompt
    says no material was found); an empty question is an error.
    """
    if not question.strip():
        raise EmptyQuestion("question is empty")
    started = clock()
    query_vec = embedder.embed(question)
    sources = index.retrieve(query_vec, k=k, document_filter=document_filter)
    prompt = build_prompt(question, sources, context_title=context_title)
    text = backend.generate(prompt)
    latency_ms = (clock() - started) * 1000.0
    return Answer(
        text=text,
        sources=sources.ranked,
        latency_ms=latency_ms,
        llm=backend.spec,
        prompt=prompt,
    )
