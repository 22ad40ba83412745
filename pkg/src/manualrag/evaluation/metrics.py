"""Positional retrieval metrics, latency aggregation, and BLEU degradation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from ..corpus import AblationKind, Document, action_spans, chunk_corpus
from ..errors import EmptyTrialSet, UnknownProcedure
from ..index import RetrievalResult
from .questions import Question

MAX_RANK = 4


@dataclass(frozen=True)
class RetrievalStats:
    """Per-rank probabilities of retrieving the correct block."""

    p1: float
    p2: float
    p3: float
    p4: float
    p_1_4: float
    never_found: tuple[int, int]  # (topics never hit, total topics)


@dataclass(frozen=True)
class LatencyStats:
    avg: float
    min: float
    max: float


@dataclass(frozen=True)
class BleuDelta:
    """Average relative BLEU change of one ablation scenario vs the full KB."""

    scenario: AblationKind
    avg_delta_pct: float
    question_count: int
    excluded_zero_baseline: int


class GroundTruth:
    """Answers 'does this chunk contain that procedure?' by span overlap.

    A chunk counts as containing a procedure when its character span
    overlaps the procedure's action text span; chunk boundaries may split
    records, so exact containment would be too strict.
    """

    def __init__(
        self,
        action_spans_by_procedure: Mapping[str, tuple[str, int, int]],
        chunk_spans_by_id: Mapping[str, tuple[str, int, int]],
    ) -> None:
        self._actions = dict(action_spans_by_procedure)
        self._chunks = dict(chunk_spans_by_id)

    @classmethod
    def from_corpus(cls, corpus: Sequence[Document], chunk_size: int) -> "GroundTruth":
        chunks = chunk_corpus(corpus, chunk_size)
        return cls(
            action_spans_by_procedure=action_spans(corpus),
            chunk_spans_by_id={
                c.chunk_id: (c.document_id, c.char_start, c.char_end) for c in chunks
            },
        )

    def knows_procedure(self, procedure_id: str) -> bool:
        return procedure_id in self._actions

    def contains(self, chunk_id: str, procedure_id: str) -> bool:
        action = self._actions.get(procedure_id)
        chunk = self._chunks.get(chunk_id)
        if action is None or chunk is None:
            return False
        a_doc, a_start, a_end = action
        c_doc, c_start, c_end = chunk
        return a_doc == c_doc and c_start < a_end and a_start < c_end


def hit_rank(
    result: RetrievalResult,
    expected_procedure_id: str,
    ground_truth: GroundTruth,
) -> Optional[int]:
    """1-based rank of the first chunk containing the procedure, else None."""
    for rank, chunk in enumerate(result.ranked, start=1):
        if ground_truth.contains(chunk.chunk_id, expected_procedure_id):
            return rank
    return None


def stats_from_hit_ranks(
    hit_ranks: Sequence[Optional[int]],
    topics: Sequence[str],
) -> RetrievalStats:
    """Count per-rank hit rates over trials and never-found topics.

    Probabilities are per trial; never_found counts topics whose correct
    chunk appeared at no rank in any of their repetitions.
    """
    if len(hit_ranks) != len(topics):
        raise ValueError("hit_ranks and topics must align")
    if not hit_ranks:
        raise EmptyTrialSet("no trials to score")
    total = len(hit_ranks)
    rank_counts = [0] * MAX_RANK
    topic_hit: dict[str, bool] = {}
    for rank, topic in zip(hit_ranks, topics):
        topic_hit.setdefault(topic, False)
        if rank is not None:
            if not 1 <= rank <= MAX_RANK:
                raise ValueError(f"hit rank {rank} outside 1..{MAX_RANK}")
            rank_counts[rank - 1] += 1
            topic_hit[topic] = True
    p = [count / total for count in rank_counts]
    never = sum(1 for hit in topic_hit.values() if not hit)
    return RetrievalStats(
        p1=p[0],
        p2=p[1],
        p3=p[2],
        p4=p[3],
        p_1_4=p[0] + p[1] + p[2] + p[3],
        never_found=(never, len(topic_hit)),
    )


def score_retrieval(
    trials: Sequence[tuple[Question, RetrievalResult, str]],
    ground_truth: GroundTruth,
) -> RetrievalStats:
    """Positional stats over (question, result, expected procedure) trials."""
    ranks: list[Optional[int]] = []
    topics: list[str] = []
    for question, result, expected_id in trials:
        if not ground_truth.knows_procedure(expected_id):
            raise UnknownProcedure(f"no action span recorded for {expected_id!r}")
        if len(result) > MAX_RANK:
            raise ValueError(
                f"result has {len(result)} entries; positional stats cover 1..{MAX_RANK}"
            )
        ranks.append(hit_rank(result, expected_id, ground_truth))
        topics.append(question.topic_id)
    return stats_from_hit_ranks(ranks, topics)


def latency_stats(values: Iterable[float]) -> LatencyStats:
    """Exact min/max and arithmetic-mean latency over one or more trials."""
    values = list(values)
    if not values:
        raise EmptyTrialSet("latency stats need at least one trial")
    return LatencyStats(
        avg=math.fsum(values) / len(values),
        min=min(values),
        max=max(values),
    )


def bleu_delta(
    full_by_question: Mapping[str, Sequence[float]],
    ablated_by_question: Mapping[str, Sequence[float]],
    scenario: AblationKind,
) -> BleuDelta:
    """Average per-question relative BLEU change, ablated vs full KB.

    Per question, BLEU is the mean over repetitions.  Questions whose
    full-KB baseline is 0 cannot yield a relative delta; they are excluded
    and counted separately.
    """
    deltas = []
    excluded = 0
    for key, full_scores in full_by_question.items():
        if key not in ablated_by_question:
            continue
        baseline = math.fsum(full_scores) / len(full_scores)
        ablated_scores = ablated_by_question[key]
        ablated = math.fsum(ablated_scores) / len(ablated_scores)
        if baseline == 0.0:
            excluded += 1
            continue
        deltas.append(100.0 * (ablated - baseline) / baseline)
    if not deltas:
        raise EmptyTrialSet(f"no {scenario.value} questions with a nonzero baseline")
    return BleuDelta(
        scenario=scenario,
        avg_delta_pct=math.fsum(deltas) / len(deltas),
        question_count=len(deltas),
        excluded_zero_baseline=excluded,
    )
