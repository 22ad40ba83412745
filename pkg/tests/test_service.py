import json

import pytest
from fastapi.testclient import TestClient

from manualrag import (
    DeterministicHashEmbedder,
    Document,
    EchoFirstSourceStub,
    Procedure,
    generate_synthetic_corpus,
    index_corpus,
)
from manualrag.config import ServiceConfig
from manualrag.service import create_app


def planted_corpus():
    corpus = generate_synthetic_corpus(5, 4, seed=31)
    host = corpus[1]
    planted = Procedure(
        procedure_id="planted-9",
        document_id=host.document_id,
        failure_symptom="the turbo separator hums at exactly four kilohertz",
        possible_cause="Resonance in the mounting frame.",
        troubleshooting_action="Install the dampener kit on the turbo separator frame.",
    )
    corpus[1] = Document.assemble(
        host.document_id, host.title, (planted,) + host.procedures
    )
    return corpus, planted


@pytest.fixture
def client(tmp_path):
    corpus, planted = planted_corpus()
    config = ServiceConfig(eval_dir=tmp_path / "eval_runs")
    app = create_app(
        config,
        corpus=corpus,
        embedder=DeterministicHashEmbedder(dim=128),
        backend=EchoFirstSourceStub(),
    )
    test_client = TestClient(app)
    test_client.planted = planted
    test_client.corpus = corpus
    return test_client


def test_healthz_reports_version_and_stub_mode(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["version"]
    assert body["stub_mode"] is True


def test_ask_empty_question_is_400_with_error_name(client):
    response = client.post("/ask", json={"question": "   "})
    assert response.status_code == 400
    assert response.json()["error"] == "EmptyQuestion"


def test_ask_returns_planted_chunk_first(client):
    response = client.post(
        "/ask",
        json={"question": "What should I do if the turbo separator hums at "
                          "exactly four kilohertz?"},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["sources"], "sources must always be returned"
    planted = client.planted
    assert planted.troubleshooting_action in body["sources"][0]["text"]
    assert body["sources"][0]["document_id"] == planted.document_id

    # brute-force cosine over the same index confirms the top chunk
    from test_index import brute_force_ranking

    embedder = DeterministicHashEmbedder(dim=128)
    index = index_corpus(client.corpus, 400, embedder)
    query = list(
        embedder.embed(
            "What should I do if the turbo separator hums at exactly four "
            "kilohertz?"
        ).components
    )
    oracle = brute_force_ranking(index, query, k=4)
    assert body["sources"][0]["chunk_id"] == oracle[0][0]


def test_ask_always_includes_sources_field_even_with_empty_kb(tmp_path):
    config = ServiceConfig(eval_dir=tmp_path)
    app = create_app(
        config,
        corpus=[],
        embedder=DeterministicHashEmbedder(dim=64),
        backend=EchoFirstSourceStub(),
    )
    with TestClient(app) as client:
        body = client.post("/ask", json={"question": "Anything at all?"}).json()
    assert body["sources"] == []
    assert body["text"]


def test_ask_respects_document_filter(client):
    target = client.corpus[0].document_id
    body = client.post(
        "/ask",
        json={"question": "What should I do if the unit does not start?",
              "document_id": target},
    ).json()
    assert body["sources"]
    assert all(s["document_id"] == target for s in body["sources"])


def test_kb_stats_and_rebuild_swaps_index(client):
    stats = client.get("/kb/stats").json()
    assert stats["documents"] == 5
    assert stats["chunks"] > 0
    assert stats["chunk_size"] == 400
    version = stats["index_version"]

    rebuilt = client.post("/kb/rebuild", json={"chunk_size": 800}).json()
    assert rebuilt["chunk_size"] == 800
    assert rebuilt["index_version"] == version + 1
    assert rebuilt["chunks"] <= stats["chunks"]


def test_kb_documents_and_chunk_listing(client):
    documents = client.get("/kb/documents").json()
    assert len(documents) == 5
    first = documents[0]
    chunks = client.get(f"/kb/documents/{first['document_id']}/chunks").json()
    assert len(chunks) == first["chunks"]
    assert chunks[0]["ordinal"] == 0
    assert chunks[0]["text"]

    missing = client.get("/kb/documents/no-such-doc/chunks")
    assert missing.status_code == 404


def test_eval_run_and_report_round_trip(client):
    run = client.post(
        "/eval/run",
        json={"n_topics": 1, "kb": ["full"], "repetitions_full_kb": 1},
    )
    assert run.status_code == 200, run.text
    body = run.json()
    assert body["planned"] == 4  # 1 topic x 4 variants x 1 rep
    assert body["executed"] == 4

    report = client.get(f"/eval/report/{body['report_id']}")
    assert report.status_code == 200
    assert report.json()["total_trials"] == 4

    assert client.get("/eval/report/bogus").status_code == 404


def test_service_makes_no_external_connections(tmp_path, no_network):
    corpus, _ = planted_corpus()
    config = ServiceConfig(eval_dir=tmp_path)
    app = create_app(
        config,
        corpus=corpus,
        embedder=DeterministicHashEmbedder(dim=64),
        backend=EchoFirstSourceStub(),
    )
    with TestClient(app) as client:
        client.get("/healthz")
        client.post("/ask", json={"question": "What should I do if it leaks?"})
        client.get("/kb/stats")
    assert no_network.attempts == []


def test_config_validation():
    from manualrag.errors import ConfigInvalid

    with pytest.raises(ConfigInvalid):
        ServiceConfig(chunk_size=555).validate()
    ServiceConfig(chunk_size=555, allow_any_chunk_size=True).validate()
    with pytest.raises(ConfigInvalid):
        ServiceConfig(k=0).validate()

    from manualrag.llm import LlmSpec

    judge_same = LlmSpec(endpoint="http://x", model_name="stub-echo-first-source")
    with pytest.raises(ConfigInvalid):
        ServiceConfig(judges=(judge_same,)).validate()


def test_load_config_round_trip(tmp_path):
    config_file = tmp_path / "svc.toml"
    config_file.write_text(
        """
[service]
listen_address = "0.0.0.0:9999"
chunk_size = 800
k = 6
eval_dir = "runs"

[embedder]
kind = "deterministic_hash"
dim = 128

[llm]
endpoint = "stub:echo-first-source"
model_name = "answerer"
top_p = 0.5

[[judges]]
endpoint = "http://judge-host:11434"
model_name = "judge-a"
"""
    )
    from manualrag.config import load_config

    config = load_config(config_file)
    assert config.listen_address == "0.0.0.0:9999"
    assert config.chunk_size == 800
    assert config.k == 6
    assert config.embedder.dim == 128
    assert config.llm.top_p == 0.5
    assert config.judges[0].model_name == "judge-a"


def test_load_config_rejects_bad_toml_and_bad_values(tmp_path):
    from manualrag.config import load_config
    from manualrag.errors import ConfigInvalid

    bad = tmp_path / "bad.toml"
    bad.write_text("not toml [ at all")
    with pytest.raises(ConfigInvalid):
        load_config(bad)

    wrong = tmp_path / "wrong.toml"
    wrong.write_text("[service]\nchunk_size = 12345\n")
    with pytest.raises(ConfigInvalid):
        load_config(wrong)
