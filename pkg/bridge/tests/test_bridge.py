import math
import os
import socket
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from encode_bridge.app import create_app
from encode_bridge.cli import parse_prefixes
from encode_bridge.config import BridgeConfig


@pytest.fixture(scope="module")
def client(local_model_dir):
    config = BridgeConfig(model=local_model_dir, max_batch=16)
    return TestClient(create_app(config))


def unit_norm(vector):
    return math.sqrt(sum(x * x for x in vector))


# --- protocol conformance -----------------------------------------------------------

def test_health_reports_dim_384(client):
    payload = client.get("/health").json()
    assert payload["dim"] == 384
    assert payload["model"]
    assert "revision" in payload


def test_three_text_batch_returns_three_unit_vectors(client):
    response = client.post(
        "/encode", json={"texts": ["first text", "second text", "third text"]}
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 384
    assert len(payload["vectors"]) == 3
    for vector in payload["vectors"]:
        assert len(vector) == 384
        assert abs(unit_norm(vector) - 1.0) <= 1e-6


def test_repeated_text_has_cosine_one(client):
    payload = client.post(
        "/encode", json={"texts": ["same words here", "same words here"]}
    ).json()
    a, b = (np.asarray(v) for v in payload["vectors"])
    assert float(a @ b) == pytest.approx(1.0, abs=1e-6)


def test_determinism_across_requests(client):
    first = client.post("/encode", json={"texts": ["stable output"]}).json()["vectors"][0]
    second = client.post("/encode", json={"texts": ["stable output"]}).json()["vectors"][0]
    assert np.allclose(first, second, atol=1e-6)


def test_distinct_texts_distinct_vectors(client):
    payload = client.post(
        "/encode", json={"texts": ["alpha beta gamma", "totally different words"]}
    ).json()
    a, b = (np.asarray(v) for v in payload["vectors"])
    assert float(a @ b) < 0.999999


def test_empty_batch(client):
    payload = client.post("/encode", json={"texts": []}).json()
    assert payload == {"dim": 384, "vectors": []}


def test_overlong_batch_refused(client):
    response = client.post("/encode", json={"texts": ["x"] * 17})
    assert response.status_code == 413


def test_malformed_request_rejected(client):
    assert client.post("/encode", json={"nope": 1}).status_code == 422
    assert client.post("/encode", json={"texts": ["x"], "role": "bogus"}).status_code == 422


def test_role_prefix_applied(local_model_dir):
    config = BridgeConfig(model=local_model_dir, role_prefixes={"query": "query: "})
    with_prefixes = TestClient(create_app(config))
    prefixed = with_prefixes.post(
        "/encode", json={"texts": ["windmill power"], "role": "query"}
    ).json()["vectors"][0]
    spelled_out = with_prefixes.post(
        "/encode", json={"texts": ["query: windmill power"]}
    ).json()["vectors"][0]
    bare = with_prefixes.post(
        "/encode", json={"texts": ["windmill power"]}
    ).json()["vectors"][0]
    assert np.allclose(prefixed, spelled_out, atol=1e-6)
    assert not np.allclose(prefixed, bare, atol=1e-4)


# --- config ---------------------------------------------------------------------------

def test_expected_dim_mismatch_fails_startup(local_model_dir):
    with pytest.raises(RuntimeError, match="expected 768"):
        create_app(BridgeConfig(model=local_model_dir, expected_dim=768))


def test_expected_dim_match_passes(local_model_dir):
    create_app(BridgeConfig(model=local_model_dir, expected_dim=384))


def test_missing_model_fails_startup(tmp_path):
    with pytest.raises(RuntimeError, match="failed to load"):
        create_app(BridgeConfig(model=str(tmp_path / "nope")))


def test_config_validation():
    with pytest.raises(ValueError):
        BridgeConfig(model="")
    with pytest.raises(ValueError):
        BridgeConfig(model="m", batch_size=0)
    with pytest.raises(ValueError):
        BridgeConfig(model="m", role_prefixes={"document": "d: "})


def test_parse_prefixes():
    assert parse_prefixes(["query=query: ", "passage=passage: "]) == {
        "query": "query: ",
        "passage": "passage: ",
    }
    with pytest.raises(ValueError):
        parse_prefixes(["queryprefix"])


# --- integration with the retrieval core's HTTP client ---------------------------------

@pytest.fixture(scope="module")
def live_server(local_model_dir):
    import uvicorn

    app = create_app(BridgeConfig(model=local_model_dir))
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 30
    import requests

    url = f"http://127.0.0.1:{port}"
    while time.monotonic() < deadline:
        try:
            if requests.get(f"{url}/health", timeout=1).ok:
                break
        except requests.RequestException:
            time.sleep(0.1)
    else:
        raise RuntimeError("bridge server did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=10)


def test_retrieval_core_http_encoder_roundtrip(live_server):
    from dualview.embed import HttpEncoder, VectorStore, cosine, encode_batch

    encoder = HttpEncoder(live_server)
    assert encoder.dim == 384  # picked up from /health
    records = encode_batch(
        ["solar energy storage", "piano sheet music", "solar energy storage"],
        encoder,
        ids=["a", "b", "a2"],
    )
    store = VectorStore.from_records(records, dim=384, normalized=True)
    assert cosine(store.vector("a"), store.vector("a2")) == pytest.approx(1.0, abs=1e-6)
    assert cosine(store.vector("a"), store.vector("b")) < 0.999999


def test_http_encoder_role_pass_through(live_server):
    from dualview.embed import HttpEncoder

    encoder = HttpEncoder(live_server, role="query")
    vectors = encoder.encode(["role routed text"])
    assert len(vectors) == 1 and vectors[0].shape == (384,)


# --- optional real-data smoke ------------------------------------------------------------

REAL_DATA_REASON = (
    "set SCIFACT_DIR (BEIR-format checkout) and BRIDGE_MODEL (real encoder id) "
    "to run the real-data smoke"
)


@pytest.mark.skipif(
    not (os.environ.get("SCIFACT_DIR") and os.environ.get("BRIDGE_MODEL")),
    reason=REAL_DATA_REASON,
)
def test_scifact_smoke_fused_not_worse_than_global():
    """50-query end-to-end with a real encoder: swept fusion must stay within
    0.01 nDCG@10 of the global-only baseline (directional, not numeric)."""
    import uvicorn

    from dualview.agents import AgentConfig, mock_agent
    from dualview.augment import augment_corpus
    from dualview.embed import HttpEncoder, VectorStore, encode_batch
    from dualview.evaluate import alpha_sweep
    from dualview.ingest import load_corpus, load_qrels, load_queries, subset
    from dualview.retrieve import global_scores, local_scores

    root = os.environ["SCIFACT_DIR"]
    corpus = load_corpus(os.path.join(root, "corpus.jsonl"))
    queries = load_queries(os.path.join(root, "queries.jsonl"))
    qrels = load_qrels(os.path.join(root, "qrels", "test.tsv"))
    corpus, queries, qrels = subset(corpus, queries, qrels, 50, seed=0, n_distractors=500)

    app = create_app(BridgeConfig(model=os.environ["BRIDGE_MODEL"]))
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    time.sleep(2)
    try:
        encoder = HttpEncoder(f"http://127.0.0.1:{port}")
        chunks, pqs, _ = augment_corpus(corpus, AgentConfig(), mock_agent)
        store = VectorStore(dim=encoder.dim)
        for texts, ids in (
            ([q.text for q in queries], [q.id for q in queries]),
            ([f"{p.title} {p.text}" if p.title else p.text for p in corpus],
             [p.id for p in corpus]),
            ([pq.text for pq in pqs], [pq.id for pq in pqs]),
        ):
            for record in encode_batch(texts, encoder, ids=ids):
                store.add(record.id, record.vector)
        g = global_scores(queries, corpus, store, top_k=1000)
        l = local_scores(queries, pqs, store, top_k=1000)
        sweep = alpha_sweep(g, l, qrels)
        values = dict(sweep.points)
        assert max(values.values()) >= values[1.0] - 0.01
    finally:
        server.should_exit = True
        thread.join(timeout=10)
