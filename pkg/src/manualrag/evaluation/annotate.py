"""Export answers for manual completeness labeling and aggregate the labels.

The automatic metrics approximate answer quality; the final word on whether
an answer carries all, some, or none of the required steps is a human call.
This module round-trips that work: export a cell's answers as JSONL rows
with an empty ``label`` field, and import the labeled file back into a
percentage table per KB state and question variant.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence, Union

from ..errors import IncompleteCell, UnlabeledRows

ANNOTATION_LABELS = ("all_steps", "all_steps_extra", "partial", "wrong")


def export_annotation_bundle(
    records: Sequence[dict],
    cell_key: str,
    out_path: Union[str, Path],
    expected_trials: Optional[int] = None,
) -> int:
    """Write one labeling row per trial of the given cell; returns row count."""
    rows = [r for r in records if r["cell_key"] == cell_key]
    if not rows:
        raise IncompleteCell(f"no trials logged for cell {cell_key!r}")
    if expected_trials is not None and len(rows) < expected_trials:
        raise IncompleteCell(
            f"cell {cell_key!r} has {len(rows)} of {expected_trials} trials"
        )
    rows.sort(key=lambda r: r["trial_id"])
    with open(out_path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(
                json.dumps(
                    {
                        "trial_id": r["trial_id"],
                        "cell_key": r["cell_key"],
                        "kb_kind": r["kb_config"]["kind"],
                        "variant": (
                            f"{r['question']['accuracy']}-{r['question']['context']}"
                        ),
                        "question": r["question"]["text"],
                        "expected_answer": r["question"]["expected_answer"],
                        "given_answer": r["answer_text"],
                        "sources": [
                            {
                                "chunk_id": s["chunk_id"],
                                "document_id": s["document_id"],
                                "rank": s["rank"],
                                "score": s["score"],
                            }
                            for s in r["retrieved"]
                        ],
                        "label": "",
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(rows)


def import_annotation_bundle(path: Union[str, Path]) -> list[dict]:
    """Read a labeled bundle; every row must carry a known label."""
    rows = []
    unlabeled = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            label = row.get("label", "")
            if not label:
                unlabeled.append(row.get("trial_id", "<unknown>"))
            elif label not in ANNOTATION_LABELS:
                raise ValueError(
                    f"row {row.get('trial_id')!r}: unknown label {label!r}; "
                    f"expected one of {ANNOTATION_LABELS}"
                )
            rows.append(row)
    if unlabeled:
        raise UnlabeledRows(f"{len(unlabeled)} rows unlabeled: {unlabeled[:5]}")
    return rows


def aggregate_labels(rows: Sequence[dict]) -> dict[tuple[str, str], dict[str, float]]:
    """Percentage table keyed by (kb_kind, variant).

    ``all_steps_pct`` includes the answers with extra steps; the extra-step
    share is reported separately, mirroring how completeness results are
    conventionally presented.
    """
    groups: dict[tuple[str, str], list[str]] = {}
    for row in rows:
        groups.setdefault((row["kb_kind"], row["variant"]), []).append(row["label"])

    table = {}
    for group_key, labels in sorted(groups.items()):
        total = len(labels)
        n_all = labels.count("all_steps")
        n_extra = labels.count("all_steps_extra")
        table[group_key] = {
            "all_steps_pct": 100.0 * (n_all + n_extra) / total,
            "all_steps_extra_pct": 100.0 * n_extra / total,
            "partial_pct": 100.0 * labels.count("partial") / total,
            "wrong_pct": 100.0 * labels.count("wrong") / total,
            "count": total,
        }
    return table
