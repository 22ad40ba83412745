"""Command-line interface binding the whole package together.

Every subcommand supports --json for machine-readable output and exits
nonzero with a structured error on failure.  `serve` starts the HTTP
service; `ask --server` talks to an already-running one instead of
answering in-process.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

from . import __version__
from .config import load_config
from .corpus import AblationKind, generate_synthetic_corpus, render_manual
from .embedding import DeterministicHashEmbedder
from .errors import ManualRagError
from .index import index_corpus, load_index, persist_index
from .llm import EchoFirstSourceStub, FixedTextStub, LlmSpec, make_backend
from .rag import ask as rag_ask
from .service import create_app, load_corpus_dir
from .evaluation import (
    ExperimentGrid,
    build_report,
    export_annotation_bundle,
    aggregate_labels,
    import_annotation_bundle,
    load_questions,
    questions_for_corpus,
    read_trial_log,
    run_grid,
    save_questions,
    validate_question_set,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def structured_errors(fn):
    """Turn domain errors into structured stderr output and exit code 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        as_json = kwargs.get("as_json", False)
        try:
            return fn(*args, **kwargs)
        except ManualRagError as exc:
            payload = {"error": type(exc).__name__, "message": str(exc)}
            if as_json:
                click.echo(json.dumps(payload), err=True)
            else:
                click.echo(f"error [{payload['error']}]: {payload['message']}", err=True)
            sys.exit(1)

    return wrapper


def _echo(data: dict, as_json: bool, human: str) -> None:
    if as_json:
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        click.echo(human)


@click.group()
@click.version_option(version=__version__)
def main() -> None:
    """Local troubleshooting assistant for technical manuals."""


# --- kb ----------------------------------------------------------------------


@main.group()
def kb() -> None:
    """Knowledge-base building and inspection."""


@kb.command("build")
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--format", "corpus_format", type=click.Choice(["xml", "plain"]),
              default="xml", show_default=True)
@click.option("--chunk-size", type=int, default=400, show_default=True)
@click.option("--embedder-dim", type=int, default=256, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def kb_build(corpus_dir: Path, corpus_format: str, chunk_size: int,
             embedder_dim: int, out_path: Path, as_json: bool) -> None:
    """Parse a corpus directory, embed its chunks, and write an index file."""
    corpus = load_corpus_dir(corpus_dir, corpus_format)
    embedder = DeterministicHashEmbedder(dim=embedder_dim)
    index = index_corpus(corpus, chunk_size, embedder)
    out_path.write_bytes(persist_index(index))
    data = {
        "documents": len(corpus),
        "chunks": len(index),
        "dim": index.dim,
        "chunk_size": chunk_size,
        "out": str(out_path),
    }
    _echo(data, as_json,
          f"indexed {data['chunks']} chunks from {data['documents']} documents "
          f"(dim {data['dim']}) -> {out_path}")


@kb.command("stats")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def kb_stats(index_path: Path, as_json: bool) -> None:
    """Summarize a persisted index file."""
    index = load_index(index_path.read_bytes())
    counts = index.document_counts()
    data = {
        "chunks": len(index),
        "documents": len(counts),
        "dim": index.dim,
        "per_document": counts,
    }
    _echo(data, as_json,
          f"{data['chunks']} chunks across {data['documents']} documents "
          f"(dim {data['dim']})")


# --- ask -----------------------------------------------------------------------


@main.command("ask")
@click.option("--question", required=True)
@click.option("--index", "index_path",
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--corpus", "corpus_dir",
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--format", "corpus_format", type=click.Choice(["xml", "plain"]),
              default="xml", show_default=True)
@click.option("--chunk-size", type=int, default=400, show_default=True)
@click.option("--embedder-dim", type=int, default=256, show_default=True)
@click.option("--document", "document_id", default=None,
              help="Restrict retrieval to one document.")
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--stub-llm", type=click.Choice(["echo-first-source", "fixed-text"]),
              default=None, help="Answer with an in-tree stub model.")
@click.option("--llm-endpoint", default=None)
@click.option("--llm-model", default=None)
@click.option("--top-p", type=float, default=0.9, show_default=True)
@click.option("--server", "server_url", default=None,
              help="Send the question to a running service instead.")
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def ask_command(question: str, index_path: Optional[Path],
                corpus_dir: Optional[Path], corpus_format: str, chunk_size: int,
                embedder_dim: int, document_id: Optional[str], k: int,
                stub_llm: Optional[str], llm_endpoint: Optional[str],
                llm_model: Optional[str], top_p: float,
                server_url: Optional[str], as_json: bool) -> None:
    """Ask one question and print the answer with its sources."""
    if server_url:
        response = httpx.post(
            f"{server_url.rstrip('/')}/ask",
            json={"question": question, "document_id": document_id, "k": k},
            timeout=120.0,
        )
        response.raise_for_status()
        payload = response.json()
    else:
        if index_path:
            index = load_index(index_path.read_bytes())
            if index.dim is not None and index.dim != embedder_dim:
                embedder_dim = index.dim
        elif corpus_dir:
            corpus = load_corpus_dir(corpus_dir, corpus_format)
            index = index_corpus(
                corpus, chunk_size, DeterministicHashEmbedder(dim=embedder_dim)
            )
        else:
            raise click.UsageError("provide --index, --corpus, or --server")
        if stub_llm == "fixed-text":
            backend = FixedTextStub()
        elif stub_llm == "echo-first-source" or not llm_endpoint:
            backend = EchoFirstSourceStub()
        else:
            backend = make_backend(
                LlmSpec(endpoint=llm_endpoint, model_name=llm_model or "model",
                        top_p=top_p)
            )
        answer = rag_ask(
            question,
            index,
            DeterministicHashEmbedder(dim=embedder_dim),
            backend,
            k=k,
            document_filter=document_id,
        )
        payload = {
            "text": answer.text,
            "sources": [
                {"chunk_id": s.chunk_id, "document_id": s.document_id,
                 "score": s.score, "text": s.text}
                for s in answer.sources
            ],
            "latency_ms": answer.latency_ms,
            "model": answer.llm.model_name,
        }

    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    click.echo(payload["text"])
    click.echo("")
    if payload["sources"]:
        click.echo("sources:")
        for s in payload["sources"]:
            click.echo(f"  [{s['chunk_id']}] {s['document_id']} "
                       f"score={s['score']:.4f}")
    else:
        click.echo("sources: none (empty knowledge base)")


# --- eval ----------------------------------------------------------------------


@main.group("eval")
def eval_group() -> None:
    """Run the evaluation grid and work with its outputs."""


def _load_grid_file(path: Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


@eval_group.command("run")
@click.option("--grid", "grid_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--corpus", "corpus_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--format", "corpus_format", type=click.Choice(["xml", "plain"]),
              default="xml", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--max-new-trials", type=int, default=None,
              help="Stop after this many newly executed trials (resumable).")
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def eval_run(grid_path: Path, corpus_dir: Path, corpus_format: str,
             out_dir: Path, max_new_trials: Optional[int], as_json: bool) -> None:
    """Execute (or resume) the experiment grid described by a TOML file."""
    data = _load_grid_file(grid_path)
    grid_cfg = data.get("grid", {})
    corpus = load_corpus_dir(corpus_dir, corpus_format)

    if "questions" in grid_cfg:
        question_path = Path(grid_cfg["questions"])
        if not question_path.is_absolute():
            question_path = grid_path.parent / question_path
        questions = load_questions(question_path)
    else:
        questions = questions_for_corpus(
            corpus,
            n_topics=int(grid_cfg.get("n_topics", 4)),
            seed=int(grid_cfg.get("seed", 0)),
        )

    llm_tables = data.get("llm", [])
    if not llm_tables:
        llm_tables = [{"endpoint": "stub:echo-first-source",
                       "model_name": "stub-echo-first-source"}]
    llms = tuple(
        LlmSpec(
            endpoint=t["endpoint"],
            model_name=t["model_name"],
            top_p=float(t.get("top_p", 0.9)),
            timeout=float(t.get("timeout", 120.0)),
        )
        for t in llm_tables
    )

    embedder_cfg = data.get("embedder", {})
    embedder = DeterministicHashEmbedder(dim=int(embedder_cfg.get("dim", 256)))

    grid = ExperimentGrid(
        llms=llms,
        top_p_values=tuple(float(v) for v in grid_cfg.get("top_p", [0.9])),
        chunk_sizes=tuple(int(v) for v in grid_cfg.get("chunk_sizes", [400])),
        questions=tuple(questions),
        repetitions_full_kb=int(grid_cfg.get("repetitions_full_kb", 2)),
        repetitions_ablated=int(grid_cfg.get("repetitions_ablated", 1)),
        k=int(grid_cfg.get("k", 4)),
    )
    kb_kinds = tuple(
        AblationKind(kind)
        for kind in grid_cfg.get("kb", ["full", "no_response", "no_entry", "no_kb"])
    )
    outcome = run_grid(
        grid, corpus, out_dir,
        kb_kinds=kb_kinds, embedder=embedder, max_new_trials=max_new_trials,
    )
    data = {
        "planned": outcome.planned,
        "executed": outcome.executed,
        "skipped": outcome.skipped,
        "failed": outcome.failed,
        "not_run": outcome.not_run,
        "failed_cells": outcome.failed_cells,
        "log": str(outcome.log_path),
    }
    _echo(data, as_json,
          f"planned {data['planned']}: executed {data['executed']}, "
          f"skipped {data['skipped']}, failed {data['failed']}, "
          f"not run {data['not_run']} -> {data['log']}")


def _pct(value: float) -> str:
    return f"{value * 100:.1f}%"


@eval_group.command("report")
@click.option("--in", "run_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def eval_report(run_dir: Path, as_json: bool) -> None:
    """Recompute the report from a run's trial log and print it."""
    records = read_trial_log(run_dir / "trials.jsonl")
    report = build_report(records)
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return
    click.echo(f"trials: {report.total_trials}")
    for key, cell in sorted(report.cells.items()):
        r = cell.retrieval
        click.echo(f"\ncell {key}")
        click.echo(f"  trials {cell.trials}  mean BLEU {cell.mean_bleu:.4f}")
        if r is not None:
            click.echo(
                f"  p1 {_pct(r.p1)}  p2 {_pct(r.p2)}  p3 {_pct(r.p3)}  "
                f"p4 {_pct(r.p4)}  p[1-4] {_pct(r.p_1_4)}  "
                f"never found {r.never_found[0]}/{r.never_found[1]}"
            )
        click.echo(
            f"  latency ms avg {cell.latency.avg:.1f} "
            f"min {cell.latency.min:.1f} max {cell.latency.max:.1f}"
        )
    if report.bleu_deltas:
        click.echo("\nBLEU deltas vs full KB:")
        for d in report.bleu_deltas:
            click.echo(
                f"  {d['llm']} top_p={d['top_p']} chunk={d['chunk_size']} "
                f"{d['variant']} {d['scenario']}: {d['avg_delta_pct']:+.2f}% "
                f"({d['question_count']} questions, "
                f"{d['excluded_zero_baseline']} excluded)"
            )


@eval_group.command("annotate")
@click.argument("action", type=click.Choice(["export", "import"]))
@click.option("--in", "in_path", required=True, type=click.Path(path_type=Path))
@click.option("--cell", "cell_key", default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def eval_annotate(action: str, in_path: Path, cell_key: Optional[str],
                  out_path: Optional[Path], as_json: bool) -> None:
    """Export a cell for manual labeling, or import labels and aggregate."""
    if action == "export":
        if not cell_key or not out_path:
            raise click.UsageError("export needs --cell and --out")
        records = read_trial_log(in_path / "trials.jsonl")
        count = export_annotation_bundle(records, cell_key, out_path)
        _echo({"rows": count, "out": str(out_path)}, as_json,
              f"exported {count} rows -> {out_path}")
        return
    rows = import_annotation_bundle(in_path)
    table = aggregate_labels(rows)
    if as_json:
        payload = {
            f"{kb_kind}|{variant}": stats
            for (kb_kind, variant), stats in table.items()
        }
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    for (kb_kind, variant), stats in table.items():
        click.echo(
            f"{kb_kind} / {variant}: "
            f"all steps {stats['all_steps_pct']:.0f}% "
            f"({stats['all_steps_extra_pct']:.0f}% with extras), "
            f"partial {stats['partial_pct']:.0f}%, "
            f"wrong {stats['wrong_pct']:.0f}%  [n={stats['count']}]"
        )


@eval_group.command("check-questions")
@click.argument("question_file", type=click.Path(exists=True, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def eval_check_questions(question_file: Path, as_json: bool) -> None:
    """Validate a question set's stems, variants, and synonym substitutions."""
    problems = validate_question_set(load_questions(question_file))
    if as_json:
        click.echo(json.dumps({"problems": problems}, indent=2))
    elif problems:
        for p in problems:
            click.echo(p)
    else:
        click.echo("question set OK")
    if problems:
        sys.exit(1)


# --- corpus --------------------------------------------------------------------


@main.group("corpus")
def corpus_group() -> None:
    """Synthetic corpus utilities."""


@corpus_group.command("synth")
@click.option("--documents", "n_documents", type=int, default=20, show_default=True)
@click.option("--procedures", "procedures_per_doc", type=int, default=10,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "corpus_format", type=click.Choice(["xml", "plain"]),
              default="xml", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--questions", "n_topics", type=int, default=0,
              help="Also emit a question set over this many topics.")
@click.option("--json", "as_json", is_flag=True)
@structured_errors
def corpus_synth(n_documents: int, procedures_per_doc: int, seed: int,
                 corpus_format: str, out_dir: Path, n_topics: int,
                 as_json: bool) -> None:
    """Write a deterministic synthetic corpus (and optionally questions)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = generate_synthetic_corpus(n_documents, procedures_per_doc, seed)
    suffix = ".xml" if corpus_format == "xml" else ".txt"
    for doc in corpus:
        (out_dir / f"{doc.document_id}{suffix}").write_bytes(
            render_manual(doc, corpus_format)
        )
    data = {"documents": len(corpus), "out": str(out_dir)}
    if n_topics:
        questions = questions_for_corpus(corpus, n_topics=n_topics, seed=seed)
        question_path = out_dir / "questions.jsonl"
        save_questions(questions, question_path)
        data["questions"] = len(questions)
        data["question_file"] = str(question_path)
    _echo(data, as_json,
          f"wrote {data['documents']} manuals to {out_dir}"
          + (f" and {data.get('questions')} questions" if n_topics else ""))


# --- serve ----------------------------------------------------------------------


@main.command("serve")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path))
@structured_errors
def serve(config_path: Path, as_json: bool = False) -> None:
    """Start the HTTP service described by a TOML config file."""
    import uvicorn

    config = load_config(config_path)
    app = create_app(config)
    host, _, port = config.listen_address.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))


if __name__ == "__main__":
    main()
