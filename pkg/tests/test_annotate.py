import json

import pytest

from manualrag import EchoFirstSourceStub, LlmSpec, generate_synthetic_corpus
from manualrag.corpus import AblationKind
from manualrag.errors import IncompleteCell, UnlabeledRows
from manualrag.evaluation import (
    ExperimentGrid,
    aggregate_labels,
    export_annotation_bundle,
    import_annotation_bundle,
    questions_for_corpus,
    read_trial_log,
    run_grid,
)


@pytest.fixture
def run_records(tmp_path):
    corpus = generate_synthetic_corpus(4, 4, seed=13)
    grid = ExperimentGrid(
        llms=(LlmSpec(endpoint="stub:echo-first-source", model_name="stub"),),
        top_p_values=(0.5,),
        chunk_sizes=(400,),
        questions=tuple(questions_for_corpus(corpus, n_topics=2, seed=1)),
        repetitions_full_kb=2,
        repetitions_ablated=1,
    )
    outcome = run_grid(
        grid, corpus, tmp_path,
        kb_kinds=(AblationKind.FULL,),
        backend_factory=lambda spec: EchoFirstSourceStub(spec),
        clock=lambda: 0.0, wall_clock=lambda: 0.0,
    )
    records = read_trial_log(outcome.log_path)
    return records, sorted({r["cell_key"] for r in records})


def test_export_writes_one_row_per_trial(run_records, tmp_path):
    records, cells = run_records
    out = tmp_path / "bundle.jsonl"
    count = export_annotation_bundle(records, cells[0], out)
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert count == len(rows) == 4  # 2 topics x 2 reps in the cell
    for row in rows:
        assert row["label"] == ""
        assert row["given_answer"]
        assert row["expected_answer"]
        assert isinstance(row["sources"], list)


def test_export_unknown_or_incomplete_cell_rejected(run_records, tmp_path):
    records, cells = run_records
    with pytest.raises(IncompleteCell):
        export_annotation_bundle(records, "no-such-cell", tmp_path / "x.jsonl")
    with pytest.raises(IncompleteCell):
        export_annotation_bundle(
            records, cells[0], tmp_path / "x.jsonl", expected_trials=99
        )


def test_round_trip_without_labels_refuses(run_records, tmp_path):
    records, cells = run_records
    out = tmp_path / "bundle.jsonl"
    export_annotation_bundle(records, cells[0], out)
    with pytest.raises(UnlabeledRows):
        import_annotation_bundle(out)


def test_unknown_label_rejected(tmp_path):
    path = tmp_path / "rows.jsonl"
    path.write_text(json.dumps({
        "trial_id": "t", "kb_kind": "full", "variant": "accurate-with_context",
        "label": "meh",
    }) + "\n")
    with pytest.raises(ValueError):
        import_annotation_bundle(path)


def write_labeled_rows(path, labels, kb_kind="full", variant="accurate-with_context"):
    with open(path, "w") as fh:
        for i, label in enumerate(labels):
            fh.write(json.dumps({
                "trial_id": f"t{i:03d}",
                "kb_kind": kb_kind,
                "variant": variant,
                "question": "q", "expected_answer": "e", "given_answer": "g",
                "sources": [], "label": label,
            }) + "\n")


def test_aggregation_matches_completeness_table_shape(tmp_path):
    # 25 answers: 16 with all steps (7 of which add extras), 7 partial, 2 wrong
    labels = (
        ["all_steps"] * 9 + ["all_steps_extra"] * 7
        + ["partial"] * 7 + ["wrong"] * 2
    )
    path = tmp_path / "labeled.jsonl"
    write_labeled_rows(path, labels)
    table = aggregate_labels(import_annotation_bundle(path))
    row = table[("full", "accurate-with_context")]
    assert row["all_steps_pct"] == pytest.approx(64.0)
    assert row["all_steps_extra_pct"] == pytest.approx(28.0)
    assert row["partial_pct"] == pytest.approx(28.0)
    assert row["wrong_pct"] == pytest.approx(8.0)
    assert row["count"] == 25


def test_aggregation_groups_by_kb_kind_and_variant(tmp_path):
    path_a = tmp_path / "a.jsonl"
    path_b = tmp_path / "b.jsonl"
    write_labeled_rows(path_a, ["wrong"] * 4, kb_kind="no_kb")
    write_labeled_rows(path_b, ["all_steps"] * 4, kb_kind="full")
    rows = import_annotation_bundle(path_a) + import_annotation_bundle(path_b)
    table = aggregate_labels(rows)
    assert table[("no_kb", "accurate-with_context")]["wrong_pct"] == 100.0
    assert table[("full", "accurate-with_context")]["all_steps_pct"] == 100.0
