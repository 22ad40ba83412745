"""Experiment grid runner: every (model, top-p, chunk size, KB state,
question, repetition) combination, logged to resumable JSONL.

The trial log is the source of truth: reports are pure recomputations from
it, so a run can be audited or re-reported long after the backends are gone.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence, Union

from ..corpus import (
    AblationKind,
    Document,
    KBConfiguration,
    apply_ablation,
)
from ..embedding import DeterministicHashEmbedder, Embedder
from ..errors import BackendUnavailable, EmptyTrialSet
from ..index import KnowledgeIndex, index_corpus
from ..llm import LlmBackend, LlmSpec, make_backend
from ..rag import ask
from .bleu import bleu
from .metrics import (
    GroundTruth,
    LatencyStats,
    RetrievalStats,
    bleu_delta,
    latency_stats,
    stats_from_hit_ranks,
)
from .questions import ContextMode, Question, question_from_dict, question_to_dict

DEFAULT_TOP_P_GRID = (0.2, 0.5, 0.9)
DEFAULT_CHUNK_SIZES = (400, 800, 1000)
DEFAULT_REPETITIONS_FULL_KB = 20
DEFAULT_REPETITIONS_ABLATED = 10
DEFAULT_KB_KINDS = (
    AblationKind.FULL,
    AblationKind.NO_RESPONSE,
    AblationKind.NO_ENTRY,
    AblationKind.NO_KB,
)

TRIAL_LOG_NAME = "trials.jsonl"
REPORT_NAME = "report.json"
RUN_META_NAME = "run_meta.json"


@dataclass(frozen=True)
class ExperimentGrid:
    llms: tuple[LlmSpec, ...]
    top_p_values: tuple[float, ...] = DEFAULT_TOP_P_GRID
    chunk_sizes: tuple[int, ...] = DEFAULT_CHUNK_SIZES
    questions: tuple[Question, ...] = ()
    repetitions_full_kb: int = DEFAULT_REPETITIONS_FULL_KB
    repetitions_ablated: int = DEFAULT_REPETITIONS_ABLATED
    k: int = 4

    def __post_init__(self) -> None:
        if not self.llms:
            raise ValueError("grid needs at least one model")
        for tp in self.top_p_values:
            if not 0.0 < tp < 1.0:
                raise ValueError(f"top_p must be in (0, 1), got {tp}")
        if self.repetitions_full_kb < 1 or self.repetitions_ablated < 1:
            raise ValueError("repetition counts must be >= 1")

    def repetitions_for(self, kind: AblationKind) -> int:
        if kind is AblationKind.FULL:
            return self.repetitions_full_kb
        return self.repetitions_ablated

    def planned_trials(self, kb_kinds: Sequence[AblationKind] = DEFAULT_KB_KINDS) -> int:
        reps = sum(self.repetitions_for(kind) for kind in kb_kinds)
        return (
            len(self.llms)
            * len(self.top_p_values)
            * len(self.chunk_sizes)
            * len(self.questions)
            * reps
        )


def cell_key_for(
    model_name: str,
    top_p: float,
    chunk_size: int,
    kb_kind: AblationKind,
    variant: str,
) -> str:
    return (
        f"{model_name}|top_p={top_p}|chunk={chunk_size}"
        f"|kb={kb_kind.value}|variant={variant}"
    )


def cell_key(
    model_name: str,
    top_p: float,
    chunk_size: int,
    kb_kind: AblationKind,
    question: Question,
) -> str:
    return cell_key_for(model_name, top_p, chunk_size, kb_kind, question.variant_key())


@dataclass(frozen=True)
class _PlannedTrial:
    trial_id: str
    cell_key: str
    llm: LlmSpec
    top_p: float
    chunk_size: int
    kb_kind: AblationKind
    question: Question
    rep: int


def _plan(
    grid: ExperimentGrid,
    kb_kinds: Sequence[AblationKind],
) -> Iterator[_PlannedTrial]:
    for llm in grid.llms:
        for top_p in grid.top_p_values:
            for chunk_size in grid.chunk_sizes:
                for kind in kb_kinds:
                    for question in grid.questions:
                        key = cell_key(llm.model_name, top_p, chunk_size, kind, question)
                        for rep in range(grid.repetitions_for(kind)):
                            yield _PlannedTrial(
                                trial_id=f"{key}|{question.topic_id}|r{rep}",
                                cell_key=key,
                                llm=llm,
                                top_p=top_p,
                                chunk_size=chunk_size,
                                kb_kind=kind,
                                question=question,
                                rep=rep,
                            )


class _IndexCache:
    """Builds each (chunk size, KB state) index once per run."""

    def __init__(self, corpus: Sequence[Document], embedder: Embedder) -> None:
        self._corpus = list(corpus)
        self._embedder = embedder
        self._cache: dict[tuple, tuple[KnowledgeIndex, GroundTruth]] = {}

    def get(
        self,
        chunk_size: int,
        kind: AblationKind,
        target_procedure_id: Optional[str],
    ) -> tuple[KnowledgeIndex, GroundTruth]:
        target = target_procedure_id if kind in (
            AblationKind.NO_RESPONSE,
            AblationKind.NO_ENTRY,
        ) else None
        key = (chunk_size, kind, target)
        if key not in self._cache:
            cfg = KBConfiguration(kind=kind, target_procedure_id=target)
            variant = apply_ablation(self._corpus, cfg)
            index = index_corpus(variant, chunk_size, self._embedder)
            truth = GroundTruth.from_corpus(variant, chunk_size)
            self._cache[key] = (index, truth)
        return self._cache[key]


def _load_existing(log_path: Path) -> dict[str, dict]:
    """Read an existing trial log, truncating a torn final line if present."""
    if not log_path.exists():
        return {}
    raw = log_path.read_bytes()
    records: dict[str, dict] = {}
    good_end = 0
    pos = 0
    while pos < len(raw):
        newline = raw.find(b"\n", pos)
        if newline == -1:
            break  # torn tail: no terminator
        line = raw[pos : newline]
        if line.strip():
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                break  # torn tail: partial write
            records[record["trial_id"]] = record
        good_end = newline + 1
        pos = newline + 1
    if good_end < len(raw):
        with open(log_path, "r+b") as fh:
            fh.truncate(good_end)
    return records


def read_trial_log(path: Union[str, Path]) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


@dataclass
class GridRunOutcome:
    report: "EvalReport"
    planned: int
    executed: int
    skipped: int
    failed: int
    not_run: int
    failed_cells: list[str]
    log_path: Path


def run_grid(
    grid: ExperimentGrid,
    corpus: Sequence[Document],
    out_dir: Union[str, Path],
    *,
    kb_kinds: Sequence[AblationKind] = DEFAULT_KB_KINDS,
    embedder: Optional[Embedder] = None,
    backend_factory: Optional[Callable[[LlmSpec], LlmBackend]] = None,
    clock: Callable[[], float] = time.monotonic,
    wall_clock: Callable[[], float] = time.time,
    max_new_trials: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> GridRunOutcome:
    """Execute (or resume) every planned trial, appending to trials.jsonl.

    Trials already present in the log are skipped, so an interrupted run
    can be resumed and converges on the same log an uninterrupted run
    would have produced.  A backend failure marks its whole cell failed
    and the grid moves on.  ``clock`` times answers and ``wall_clock``
    stamps records; both are injectable so stub runs are reproducible.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    log_path = out_path / TRIAL_LOG_NAME

    embedder = embedder or DeterministicHashEmbedder()
    factory = backend_factory or make_backend
    existing = _load_existing(log_path)
    planned = list(_plan(grid, kb_kinds))
    titles = {doc.document_id: doc.title for doc in corpus}
    cache = _IndexCache(corpus, embedder)
    backends: dict[tuple[str, float], LlmBackend] = {}
    failed_cells: set[str] = set()

    executed = skipped = failed = not_run = 0
    with open(log_path, "a", encoding="utf-8") as fh:
        for i, trial in enumerate(planned):
            if progress is not None:
                progress(i, len(planned))
            if trial.trial_id in existing:
                skipped += 1
                continue
            if trial.cell_key in failed_cells:
                failed += 1
                continue
            if max_new_trials is not None and executed >= max_new_trials:
                not_run += 1
                continue

            question = trial.question
            index, truth = cache.get(
                trial.chunk_size, trial.kb_kind, question.expected_procedure_id
            )
            backend_key = (trial.llm.model_name, trial.top_p)
            if backend_key not in backends:
                backends[backend_key] = factory(
                    dataclasses.replace(trial.llm, top_p=trial.top_p)
                )
            with_context = question.context is ContextMode.WITH_CONTEXT
            try:
                answer = ask(
                    question.text,
                    index,
                    embedder,
                    backends[backend_key],
                    k=grid.k,
                    document_filter=(
                        question.context_document_id if with_context else None
                    ),
                    context_title=(
                        titles.get(question.context_document_id)
                        if with_context
                        else None
                    ),
                    clock=clock,
                )
            except BackendUnavailable:
                failed_cells.add(trial.cell_key)
                failed += 1
                continue

            record = {
                "trial_id": trial.trial_id,
                "cell_key": trial.cell_key,
                "question": question_to_dict(question),
                "kb_config": {
                    "kind": trial.kb_kind.value,
                    "target_procedure_id": (
                        question.expected_procedure_id
                        if trial.kb_kind
                        in (AblationKind.NO_RESPONSE, AblationKind.NO_ENTRY)
                        else None
                    ),
                },
                "llm": trial.llm.model_name,
                "top_p": trial.top_p,
                "chunk_size": trial.chunk_size,
                "rep": trial.rep,
                "retrieved": [
                    {
                        "chunk_id": src.chunk_id,
                        "rank": rank,
                        "score": src.score,
                        "document_id": src.document_id,
                        "contains_expected": truth.contains(
                            src.chunk_id, question.expected_procedure_id
                        ),
                    }
                    for rank, src in enumerate(answer.sources, start=1)
                ],
                "answer_text": answer.text,
                "latency_ms": answer.latency_ms,
                "timestamp": wall_clock(),
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()
            executed += 1

    records = read_trial_log(log_path)
    report = build_report(records)
    (out_path / REPORT_NAME).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    meta = {
        "planned": len(planned),
        "executed": executed,
        "skipped": skipped,
        "failed": failed,
        "not_run": not_run,
        "failed_cells": sorted(failed_cells),
    }
    (out_path / RUN_META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8"
    )
    return GridRunOutcome(
        report=report,
        planned=len(planned),
        executed=executed,
        skipped=skipped,
        failed=failed,
        not_run=not_run,
        failed_cells=sorted(failed_cells),
        log_path=log_path,
    )


# --- reporting ----------------------------------------------------------------


@dataclass
class CellReport:
    cell_key: str
    llm: str
    top_p: float
    chunk_size: int
    kb_kind: AblationKind
    variant: str
    trials: int
    retrieval: Optional[RetrievalStats]
    latency: LatencyStats
    mean_bleu: float
    answers: list[dict]

    def to_dict(self) -> dict:
        return {
            "cell_key": self.cell_key,
            "llm": self.llm,
            "top_p": self.top_p,
            "chunk_size": self.chunk_size,
            "kb_kind": self.kb_kind.value,
            "variant": self.variant,
            "trials": self.trials,
            "retrieval": (
                {
                    "p1": self.retrieval.p1,
                    "p2": self.retrieval.p2,
                    "p3": self.retrieval.p3,
                    "p4": self.retrieval.p4,
                    "p_1_4": self.retrieval.p_1_4,
                    "never_found": list(self.retrieval.never_found),
                }
                if self.retrieval is not None
                else None
            ),
            "latency": {
                "avg_ms": self.latency.avg,
                "min_ms": self.latency.min,
                "max_ms": self.latency.max,
            },
            "mean_bleu": self.mean_bleu,
            "answers": self.answers,
        }


@dataclass
class EvalReport:
    cells: dict[str, CellReport]
    bleu_deltas: list[dict]
    total_trials: int

    def to_dict(self) -> dict:
        return {
            "total_trials": self.total_trials,
            "cells": {key: cell.to_dict() for key, cell in sorted(self.cells.items())},
            "bleu_deltas": self.bleu_deltas,
        }


def _hit_rank_from_record(record: dict) -> Optional[int]:
    for entry in record["retrieved"][:4]:
        if entry.get("contains_expected"):
            return entry["rank"]
    return None


def build_report(records: Sequence[dict]) -> EvalReport:
    """Recompute every metric from the trial log alone (pure function)."""
    by_cell: dict[str, list[dict]] = {}
    for record in records:
        by_cell.setdefault(record["cell_key"], []).append(record)

    cells: dict[str, CellReport] = {}
    for key in sorted(by_cell):
        cell_records = sorted(by_cell[key], key=lambda r: r["trial_id"])
        first = cell_records[0]
        question_of = {
            r["trial_id"]: question_from_dict(r["question"]) for r in cell_records
        }
        answers = []
        ranks = []
        topics = []
        for r in cell_records:
            rank = _hit_rank_from_record(r)
            score = bleu(r["answer_text"], r["question"]["expected_answer"])
            answers.append(
                {
                    "trial_id": r["trial_id"],
                    "topic_id": r["question"]["topic_id"],
                    "hit_rank": rank,
                    "bleu": score,
                    "latency_ms": r["latency_ms"],
                }
            )
            ranks.append(rank)
            topics.append(r["question"]["topic_id"])
        cells[key] = CellReport(
            cell_key=key,
            llm=first["llm"],
            top_p=first["top_p"],
            chunk_size=first["chunk_size"],
            kb_kind=AblationKind(first["kb_config"]["kind"]),
            variant=question_of[first["trial_id"]].variant_key(),
            trials=len(cell_records),
            retrieval=stats_from_hit_ranks(ranks, topics),
            latency=latency_stats([r["latency_ms"] for r in cell_records]),
            mean_bleu=(
                sum(a["bleu"] for a in answers) / len(answers) if answers else 0.0
            ),
            answers=answers,
        )

    deltas = _bleu_deltas(cells)
    return EvalReport(cells=cells, bleu_deltas=deltas, total_trials=len(records))


def _scores_by_question(cell: CellReport) -> dict[str, list[float]]:
    scores: dict[str, list[float]] = {}
    for answer in cell.answers:
        scores.setdefault(answer["topic_id"], []).append(answer["bleu"])
    return scores


def _bleu_deltas(cells: dict[str, CellReport]) -> list[dict]:
    """Pair each ablated cell with its full-KB twin and compute the delta."""
    deltas = []
    for key in sorted(cells):
        cell = cells[key]
        if cell.kb_kind is AblationKind.FULL:
            continue
        full_key = cell_key_for(
            cell.llm, cell.top_p, cell.chunk_size, AblationKind.FULL, cell.variant
        )
        full_cell = cells.get(full_key)
        if full_cell is None:
            continue
        try:
            delta = bleu_delta(
                _scores_by_question(full_cell),
                _scores_by_question(cell),
                cell.kb_kind,
            )
        except EmptyTrialSet:
            continue  # all-zero baselines: nothing to report for this pair
        deltas.append(
            {
                "llm": cell.llm,
                "top_p": cell.top_p,
                "chunk_size": cell.chunk_size,
                "variant": cell.variant,
                "scenario": delta.scenario.value,
                "avg_delta_pct": delta.avg_delta_pct,
                "question_count": delta.question_count,
                "excluded_zero_baseline": delta.excluded_zero_baseline,
            }
        )
    return deltas
