"""Evaluation harness: question sets, experiment grid, and metrics."""

from .bleu import bleu
from .metrics import (
    BleuDelta,
    GroundTruth,
    LatencyStats,
    RetrievalStats,
    bleu_delta,
    latency_stats,
    score_retrieval,
    stats_from_hit_ranks,
)
from .questions import (
    Accuracy,
    ContextMode,
    QUESTION_STEM,
    Question,
    load_questions,
    questions_for_corpus,
    save_questions,
    validate_question_set,
)
from .grid import (
    DEFAULT_CHUNK_SIZES,
    DEFAULT_REPETITIONS_ABLATED,
    DEFAULT_REPETITIONS_FULL_KB,
    DEFAULT_TOP_P_GRID,
    CellReport,
    EvalReport,
    ExperimentGrid,
    build_report,
    read_trial_log,
    run_grid,
)
from .annotate import (
    ANNOTATION_LABELS,
    aggregate_labels,
    export_annotation_bundle,
    import_annotation_bundle,
)

__all__ = [
    "Accuracy",
    "ANNOTATION_LABELS",
    "BleuDelta",
    "CellReport",
    "ContextMode",
    "DEFAULT_CHUNK_SIZES",
    "DEFAULT_REPETITIONS_ABLATED",
    "DEFAULT_REPETITIONS_FULL_KB",
    "DEFAULT_TOP_P_GRID",
    "EvalReport",
    "ExperimentGrid",
    "GroundTruth",
    "LatencyStats",
    "QUESTION_STEM",
    "Question",
    "RetrievalStats",
    "aggregate_labels",
    "bleu",
    "bleu_delta",
    "build_report",
    "export_annotation_bundle",
    "import_annotation_bundle",
    "latency_stats",
    "load_questions",
    "questions_for_corpus",
    "read_trial_log",
    "run_grid",
    "save_questions",
    "score_retrieval",
    "stats_from_hit_ranks",
    "validate_question_set",
]
