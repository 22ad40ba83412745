"""Operator question sets: the four variants, file IO, and authoring checks.

Each topic carries four questions that all expect the same procedure:
accurate or inaccurate terminology, crossed with the presence or absence
of a reference to the containing document.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from random import Random
from typing import Optional, Sequence, Union

from ..corpus import Document

QUESTION_STEM = "What should I do if"


class Accuracy(str, Enum):
    ACCURATE = "accurate"
    INACCURATE = "inaccurate"


class ContextMode(str, Enum):
    WITH_CONTEXT = "with_context"
    WITHOUT_CONTEXT = "without_context"


@dataclass(frozen=True)
class Question:
    topic_id: str
    accuracy: Accuracy
    context: ContextMode
    text: str
    expected_procedure_id: str
    expected_answer: str
    context_document_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.context is ContextMode.WITH_CONTEXT and not self.context_document_id:
            raise ValueError("with_context questions need a context_document_id")

    def variant_key(self) -> str:
        return f"{self.accuracy.value}-{self.context.value}"

    def key(self) -> str:
        return f"{self.topic_id}|{self.variant_key()}"


def question_to_dict(q: Question) -> dict:
    return {
        "topic_id": q.topic_id,
        "accuracy": q.accuracy.value,
        "context": q.context.value,
        "text": q.text,
        "expected_procedure_id": q.expected_procedure_id,
        "expected_answer": q.expected_answer,
        "context_document_id": q.context_document_id,
    }


def question_from_dict(data: dict) -> Question:
    return Question(
        topic_id=data["topic_id"],
        accuracy=Accuracy(data["accuracy"]),
        context=ContextMode(data["context"]),
        text=data["text"],
        expected_procedure_id=data["expected_procedure_id"],
        expected_answer=data["expected_answer"],
        context_document_id=data.get("context_document_id"),
    )


def save_questions(questions: Sequence[Question], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(question_to_dict(q), ensure_ascii=False) + "\n")


def load_questions(path: Union[str, Path]) -> list[Question]:
    questions = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                questions.append(question_from_dict(json.loads(line)))
    return questions


def validate_question_set(questions: Sequence[Question]) -> list[str]:
    """Authoring checks; returns a list of human-readable problems.

    Checks the template stem, the four-variant coverage per topic, and
    that inaccurate variants actually changed wording relative to the
    accurate ones (the synonym-substitution diff).
    """
    problems = []
    by_topic: dict[str, dict[str, Question]] = {}
    for q in questions:
        if not q.text.startswith(QUESTION_STEM):
            problems.append(
                f"{q.topic_id}/{q.variant_key()}: text does not start with "
                f"{QUESTION_STEM!r}"
            )
        slot = by_topic.setdefault(q.topic_id, {})
        if q.variant_key() in slot:
            problems.append(f"{q.topic_id}: duplicate variant {q.variant_key()}")
        slot[q.variant_key()] = q

    all_variants = [
        f"{acc.value}-{ctx.value}" for acc in Accuracy for ctx in ContextMode
    ]
    for topic_id, slot in sorted(by_topic.items()):
        for variant in all_variants:
            if variant not in slot:
                problems.append(f"{topic_id}: missing variant {variant}")
        for ctx in ContextMode:
            acc = slot.get(f"accurate-{ctx.value}")
            inacc = slot.get(f"inaccurate-{ctx.value}")
            if acc and inacc and acc.text == inacc.text:
                problems.append(
                    f"{topic_id}: inaccurate-{ctx.value} is identical to the "
                    "accurate wording (no synonym substitution)"
                )
    return problems


def variant_term_diff(accurate_text: str, inaccurate_text: str) -> tuple[set, set]:
    """Token sets unique to each variant, for reviewing substitutions."""
    acc = set(re.findall(r"[0-9a-z]+", accurate_text.lower()))
    inacc = set(re.findall(r"[0-9a-z]+", inaccurate_text.lower()))
    return acc - inacc, inacc - acc


# --- synthetic question sets --------------------------------------------------

# Generic replacements applied to build the inaccurate variants: domain terms
# swapped for vaguer everyday words.
_GENERIC_SYNONYMS = {
    "pump": "machine",
    "compressor": "machine",
    "valve": "fitting",
    "actuator": "mover",
    "separator": "unit",
    "condenser": "cooler",
    "generator": "power unit",
    "panel": "display",
    "console": "screen",
    "consoles": "screens",
    "pressure": "force",
    "temperature": "heat",
    "vibration": "shaking",
    "accelerometer": "motion detector",
    "sensor": "detector",
    "indicator": "light",
    "alarm": "warning",
    "connection": "joint",
    "cable": "wire",
    "gauge": "meter",
    "threshold": "limit",
    "circuit": "loop",
    "readout": "display value",
    "solenoid": "electric part",
    "transmitter": "sender",
    "flange": "rim",
    "fittings": "joints",
    "residue": "dirt",
}

_WORD = re.compile(r"[A-Za-z]+")


def make_inaccurate(text: str) -> str:
    """Replace domain terms with generic synonyms, preserving case of starts."""

    def swap(match: re.Match) -> str:
        word = match.group(0)
        repl = _GENERIC_SYNONYMS.get(word.lower())
        if repl is None:
            return word
        if word[0].isupper():
            return repl.capitalize()
        return repl

    return _WORD.sub(swap, text)


def _question_text(symptom: str) -> str:
    clause = symptom[0].lower() + symptom[1:] if symptom else symptom
    return f"{QUESTION_STEM} {clause}?"


def questions_for_corpus(
    corpus: Sequence[Document],
    n_topics: int,
    seed: int = 0,
) -> list[Question]:
    """Sample topics from a corpus and build the four variants for each."""
    procedures = [(doc, p) for doc in corpus for p in doc.procedures]
    if n_topics < 1 or n_topics > len(procedures):
        raise ValueError(
            f"n_topics must be in 1..{len(procedures)}, got {n_topics}"
        )
    rng = Random(seed)
    picked = rng.sample(procedures, n_topics)
    questions = []
    for doc, proc in picked:
        accurate = _question_text(proc.failure_symptom)
        inaccurate = make_inaccurate(accurate)
        for accuracy, text in ((Accuracy.ACCURATE, accurate), (Accuracy.INACCURATE, inaccurate)):
            for context in ContextMode:
                questions.append(
                    Question(
                        topic_id=f"topic-{proc.procedure_id}",
                        accuracy=accuracy,
                        context=context,
                        text=text,
                        expected_procedure_id=proc.procedure_id,
                        expected_answer=proc.troubleshooting_action,
                        context_document_id=(
                            doc.document_id
                            if context is ContextMode.WITH_CONTEXT
                            else None
                        ),
                    )
                )
    return questions
