"""Answer scoring by an ensemble of judge models.

Each judge sees a frozen prompt asking it to rate, from 1 to 10, how close
a generated answer is to the reference answer in content.  Judge replies
are parsed defensively (judges decorate their output despite instructions),
invalid verdicts are excluded rather than imputed, and both mean and median
ensembles are reported.  Judges must be distinct from the answering models.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass
from typing import Collection, Mapping, Optional, Sequence, Union

from .errors import AllJudgesInvalid, InsufficientData, JudgeOverlapsRag
from .llm import LlmBackend, LlmSpec, make_backend

# Frozen verbatim, including its original punctuation; evaluation
# comparability depends on never editing this string.
_TEMPLATE_BEFORE_REFERENCE = (
    "The text within the brackets is referred to as the 'reference' (\""
)
_TEMPLATE_AFTER_REFERENCE = (
    "\" ). The text after the exclamation mark symbol is referred to as the "
    "'comparison'. Your task is to assess the similarity between the content "
    "of the 'reference' and the content of the 'comparison', answering only "
    "with a number between '1' and '10' inclusive. If you answer '1', the "
    "content of 'reference' is completely different from the content of "
    "'comparison', whereas if you answer is '10' the content of the "
    "'reference' and the content of the 'comparison' are extremely similar. "
    "The check you have to make is not about the form, but about the "
    "content. It is not necessary that the exact same words are used, but "
    "the meaning must be the same. !"
)

_FIRST_INTEGER = re.compile(r"-?\d+")


def build_judge_prompt(reference: str, comparison: str) -> str:
    """Substitute reference and comparison into the frozen judge template."""
    return (
        _TEMPLATE_BEFORE_REFERENCE
        + reference
        + _TEMPLATE_AFTER_REFERENCE
        + comparison
    )


@dataclass(frozen=True)
class JudgeVerdict:
    judge_name: str
    raw_reply: str
    score: Optional[int]  # None when the reply could not be scored

    @property
    def valid(self) -> bool:
        return self.score is not None


def parse_score(reply: str) -> Optional[int]:
    """First integer token of the reply, accepted only if it lies in 1..10."""
    match = _FIRST_INTEGER.search(reply)
    if match is None:
        return None
    value = int(match.group(0))
    if not 1 <= value <= 10:
        return None
    return value


@dataclass(frozen=True)
class EnsembleScore:
    verdicts: tuple[JudgeVerdict, ...]
    mean: Optional[float]
    median: Optional[float]
    valid_count: int


def aggregate_verdicts(verdicts: Sequence[JudgeVerdict]) -> EnsembleScore:
    """Mean and median over valid verdicts only; both absent when none are."""
    valid = [v.score for v in verdicts if v.score is not None]
    if not valid:
        return EnsembleScore(
            verdicts=tuple(verdicts), mean=None, median=None, valid_count=0
        )
    return EnsembleScore(
        verdicts=tuple(verdicts),
        mean=math.fsum(valid) / len(valid),
        median=float(statistics.median(valid)),
        valid_count=len(valid),
    )


def judge(
    answer: str,
    expected: str,
    judges: Sequence[Union[LlmSpec, LlmBackend]],
    rag_model_names: Collection[str] = (),
) -> EnsembleScore:
    """Query every judge about one answer and aggregate the verdicts.

    ``rag_model_names`` lists the answering models; any judge sharing a
    model name with them is rejected outright to keep the jury unbiased.
    """
    if not judges:
        raise ValueError("at least one judge is required")
    backends = [make_backend(j) if isinstance(j, LlmSpec) else j for j in judges]
    for backend in backends:
        if backend.spec.model_name in rag_model_names:
            raise JudgeOverlapsRag(
                f"judge {backend.spec.model_name!r} is also an answering model"
            )
    prompt = build_judge_prompt(expected, answer)
    verdicts = []
    for backend in backends:
        reply = backend.generate(prompt)
        verdicts.append(
            JudgeVerdict(
                judge_name=backend.spec.model_name,
                raw_reply=reply,
                score=parse_score(reply),
            )
        )
    score = aggregate_verdicts(verdicts)
    if score.valid_count == 0:
        raise AllJudgesInvalid("no judge produced a score in 1..10")
    return score


def judge_trial_records(
    records: Sequence[Mapping],
    judges: Sequence[Union[LlmSpec, LlmBackend]],
    rag_model_names: Collection[str] = (),
    cell_key: Optional[str] = None,
) -> dict[str, EnsembleScore]:
    """Score logged trial answers against their expected answers.

    Takes rows of a grid trial log (optionally restricted to one cell) and
    returns one ensemble score per trial_id.  This is how jury scores get
    attached to an evaluation report after a run: grid execution needs only
    the answering backend, judging can happen later and offline.
    """
    scores: dict[str, EnsembleScore] = {}
    for record in records:
        if cell_key is not None and record["cell_key"] != cell_key:
            continue
        scores[record["trial_id"]] = judge(
            record["answer_text"],
            record["question"]["expected_answer"],
            judges,
            rag_model_names=rag_model_names,
        )
    return scores


# --- calibration against human ground truth -----------------------------------


def _average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks starting at 1, ties receiving the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg_rank = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = avg_rank
        i = j + 1
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank correlation (average ranks for ties)."""
    if len(a) != len(b):
        raise ValueError("sequences must have equal length")
    ra, rb = _average_ranks(a), _average_ranks(b)
    n = len(ra)
    mean_a = math.fsum(ra) / n
    mean_b = math.fsum(rb) / n
    cov = math.fsum((x - mean_a) * (y - mean_b) for x, y in zip(ra, rb))
    var_a = math.fsum((x - mean_a) ** 2 for x in ra)
    var_b = math.fsum((y - mean_b) ** 2 for y in rb)
    if var_a == 0.0 or var_b == 0.0:
        raise InsufficientData("constant scores have no rank correlation")
    return cov / math.sqrt(var_a * var_b)


@dataclass(frozen=True)
class CalibrationTable:
    """Rank correlation with human scores, per judge and per ensemble."""

    per_judge: dict[str, float]
    mean_ensemble: float
    median_ensemble: float

    def best(self) -> str:
        rows = dict(self.per_judge)
        rows["mean_ensemble"] = self.mean_ensemble
        rows["median_ensemble"] = self.median_ensemble
        return max(rows, key=lambda name: rows[name])

    def to_dict(self) -> dict:
        return {
            "per_judge": dict(self.per_judge),
            "mean_ensemble": self.mean_ensemble,
            "median_ensemble": self.median_ensemble,
            "best": self.best(),
        }


def calibrate(
    judge_scores: Mapping[str, Sequence[float]],
    human_scores: Sequence[float],
) -> CalibrationTable:
    """Correlate each judge, the mean ensemble, and the median ensemble
    against human scores over the same questions."""
    n = len(human_scores)
    if n < 5:
        raise InsufficientData(f"need >= 5 paired observations, got {n}")
    for name, scores in judge_scores.items():
        if len(scores) != n:
            raise ValueError(f"judge {name!r} has {len(scores)} scores, expected {n}")
    if not judge_scores:
        raise ValueError("at least one judge is required")

    names = list(judge_scores)
    per_judge = {
        name: spearman(judge_scores[name], human_scores) for name in names
    }
    means = [
        math.fsum(judge_scores[name][i] for name in names) / len(names)
        for i in range(n)
    ]
    medians = [
        float(statistics.median(judge_scores[name][i] for name in names))
        for i in range(n)
    ]
    return CalibrationTable(
        per_judge=per_judge,
        mean_ensemble=spearman(means, human_scores),
        median_ensemble=spearman(medians, human_scores),
    )
