import numpy as np
import pytest
from fastapi.testclient import TestClient

from kpabridge.app import create_app
from kpabridge.models import StubModels


@pytest.fixture
def client():
    return TestClient(create_app())


WORDS = ["uniform", "school", "cost", "privacy", "speech", "data", "safety", "rules"]


def random_texts(rng, n):
    return [
        " ".join(WORDS[k] for k in rng.integers(0, len(WORDS), size=rng.integers(1, 7)))
        for _ in range(n)
    ]


def test_embed_contract_single_batch(client):
    response = client.post("/embed", json={"texts": ["one text", "another text"]})
    assert response.status_code == 200
    body = response.json()
    assert len(body["vectors"]) == 2
    assert all(len(vec) == body["dim"] for vec in body["vectors"])


def test_embed_invariants_50_random_batches(client):
    rng = np.random.default_rng(0)
    for _ in range(50):
        texts = random_texts(rng, int(rng.integers(1, 9)))
        body = client.post("/embed", json={"texts": texts}).json()
        assert len(body["vectors"]) == len(texts)
        assert all(len(vec) == body["dim"] for vec in body["vectors"])


def test_embed_deterministic(client):
    first = client.post("/embed", json={"texts": ["same text"]}).json()
    second = client.post("/embed", json={"texts": ["same text"]}).json()
    assert first == second


def test_embed_batch_order_preserved(client):
    texts = ["alpha alpha", "beta beta", "gamma gamma"]
    batch = client.post("/embed", json={"texts": texts}).json()["vectors"]
    for i, text in enumerate(texts):
        solo = client.post("/embed", json={"texts": [text]}).json()["vectors"][0]
        assert batch[i] == solo


def test_generate_echo(client):
    response = client.post("/generate", json={"prompt": "Positive topic arg one two", "max_new_tokens": 3})
    assert response.status_code == 200
    assert response.json()["text"] == "Positive topic arg"


def test_generate_accepts_seed(client):
    response = client.post("/generate", json={"prompt": "some prompt", "max_new_tokens": 8, "seed": 11})
    assert response.status_code == 200
    assert response.json()["text"]


def test_score_contract_and_range(client):
    pairs = [
        {"candidate": "uniforms cost money", "reference": "uniforms are expensive"},
        {"candidate": "identical text", "reference": "identical text"},
    ]
    body = client.post("/score", json={"pairs": pairs, "metric": "token_overlap"}).json()
    lo, hi = body["range"]
    assert len(body["scores"]) == 2
    assert all(lo <= s <= hi for s in body["scores"])
    assert body["scores"][1] == hi  # identical pair saturates the range


def test_score_exact_metric(client):
    pairs = [
        {"candidate": "same", "reference": "same"},
        {"candidate": "same", "reference": "different"},
    ]
    body = client.post("/score", json={"pairs": pairs, "metric": "exact"}).json()
    assert body["scores"] == [1.0, 0.0]


def test_score_batch_order_preserved(client):
    rng = np.random.default_rng(1)
    pairs = [
        {"candidate": c, "reference": r}
        for c, r in zip(random_texts(rng, 10), random_texts(rng, 10))
    ]
    batch = client.post("/score", json={"pairs": pairs, "metric": "token_overlap"}).json()["scores"]
    singles = [
        client.post("/score", json={"pairs": [pair], "metric": "token_overlap"}).json()["scores"][0]
        for pair in pairs
    ]
    assert batch == singles


def test_identical_pair_dominates_cross_pairs(client):
    pairs = [
        {"candidate": "the very same words", "reference": "the very same words"},
        {"candidate": "the very same words", "reference": "entirely different content"},
    ]
    scores = client.post("/score", json={"pairs": pairs, "metric": "token_overlap"}).json()["scores"]
    assert scores[0] >= scores[1]


def test_health_ok(client):
    body = client.get("/health")
    assert body.status_code == 200
    payload = body.json()
    assert payload["status"] == "ok"
    assert "embedder" in payload["models"]


def test_health_503_before_load():
    unloaded = TestClient(create_app(defer_load=True))
    assert unloaded.get("/health").status_code == 503
    assert unloaded.post("/embed", json={"texts": ["x"]}).status_code == 503


def test_malformed_body_400(client):
    assert client.post("/embed", json={"wrong": 1}).status_code == 400
    assert client.post("/generate", json={"prompt": 42}).status_code == 400
    assert client.post("/score", json={"pairs": "oops"}).status_code == 400


def test_empty_text_422(client):
    assert client.post("/embed", json={"texts": []}).status_code == 422
    assert client.post("/embed", json={"texts": ["ok", "  "]}).status_code == 422
    assert client.post("/generate", json={"prompt": "   "}).status_code == 422
    assert client.post("/score", json={"pairs": []}).status_code == 422


def test_unknown_metric_400(client):
    pairs = [{"candidate": "a", "reference": "b"}]
    assert client.post("/score", json={"pairs": pairs, "metric": "nope"}).status_code == 400


def test_generation_timeout_504():
    slow = TestClient(create_app(models=StubModels(generate_delay=0.3), generate_timeout=0.05))
    response = slow.post("/generate", json={"prompt": "slow model", "max_new_tokens": 4})
    assert response.status_code == 504
