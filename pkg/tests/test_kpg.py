import numpy as np
import pytest

from kpakit.corpus import Stance
from kpakit.embedding import EmbeddingStore, cosine
from kpakit.errors import BackendError, StageError
from kpakit.kpg import (
    ExtractiveBackend,
    GeneratedKeyPoint,
    Prompt,
    assemble_prompt,
    dedup_merge,
    generate,
    rank_and_truncate,
)


def kp(kp_id, size, centrality=0.0, text=None, sources=None):
    return GeneratedKeyPoint(
        id=kp_id,
        text=text or f"kp{kp_id}",
        source_cluster_ids=sources or {kp_id},
        effective_size=size,
        centrality=centrality,
    )


def test_prompt_format_matches_stance_topic_args():
    prompt = assemble_prompt(Stance.PRO, "T", [("a1", "a1 text"), ("a2", "a2 text")], budget=2000)
    assert prompt.rendered == "Positive T a1 text a2 text"
    con = assemble_prompt(Stance.CON, "T", [("a1", "x")], budget=2000)
    assert con.rendered.startswith("Negative ")


def test_prompt_budget_drops_from_tail():
    args = [("a1", "one"), ("a2", "two"), ("a3", "waytoolongargument" * 10)]
    budget = len("Positive T one two")
    prompt = assemble_prompt(Stance.PRO, "T", args, budget=budget)
    assert prompt.rendered == "Positive T one two"
    assert prompt.arg_ids == ("a1", "a2")


def test_prompt_budget_exhausted_errors():
    with pytest.raises(StageError, match="budget exhausted"):
        assemble_prompt(Stance.PRO, "T", [("a1", "longish argument")], budget=len("Positive T"))


def test_prompt_empty_cluster_errors():
    with pytest.raises(StageError):
        assemble_prompt(Stance.PRO, "T", [], budget=100)


def test_extractive_backend_returns_medoid_text():
    rng = np.random.default_rng(1)
    base = rng.normal(size=4)
    vectors = {
        "a1": base + rng.normal(scale=0.05, size=4),
        "a2": base + rng.normal(scale=0.05, size=4),
        "a3": base + rng.normal(scale=0.05, size=4),
        "a4": -3.0 * base,
        "a5": base + rng.normal(scale=0.05, size=4),
    }
    store = EmbeddingStore(vectors)
    from kpakit.embedding import medoid

    ids = ["a1", "a2", "a3", "a4", "a5"]
    expected = ids[medoid([store[i] for i in ids])]
    prompt = Prompt(
        stance_word="Positive",
        topic_text="T",
        arg_ids=tuple(ids),
        arg_texts=tuple(f"text of {i}" for i in ids),
    )
    assert generate(prompt, ExtractiveBackend(store)) == f"text of {expected}"


def test_remote_backend_echo_stub(monkeypatch):
    from kpakit.kpg import RemoteBackend

    class FakeResponse:
        def raise_for_status(self):
            pass

        def json(self):
            return {"text": "KP"}

    def fake_post(url, json=None, timeout=None):
        assert url.endswith("/generate")
        assert json["prompt"].startswith("Positive")
        return FakeResponse()

    import requests

    monkeypatch.setattr(requests, "post", fake_post)
    prompt = Prompt("Positive", "T", ("a1",), ("one",))
    assert generate(prompt, RemoteBackend("http://bridge")) == "KP"


def test_remote_backend_down_errors():
    from kpakit.kpg import RemoteBackend

    prompt = Prompt("Positive", "T", ("a1",), ("one",))
    backend = RemoteBackend("http://127.0.0.1:1", timeout=0.2)
    with pytest.raises(BackendError, match="unreachable"):
        generate(prompt, backend)


def unit(angle):
    return np.array([np.cos(angle), np.sin(angle)])


def test_dedup_merges_pair_keeps_larger_text():
    kps = [kp(1, 4, text="small"), kp(2, 6, text="big")]
    embeddings = {1: unit(0.0), 2: unit(0.05)}
    assert cosine(embeddings[1], embeddings[2]) >= 0.95
    merged = dedup_merge(kps, embeddings)
    assert len(merged) == 1
    assert merged[0].text == "big"
    assert merged[0].effective_size == 10
    assert merged[0].source_cluster_ids == {1, 2}


def test_dedup_no_merge_below_threshold():
    kps = [kp(1, 4), kp(2, 6), kp(3, 2)]
    embeddings = {1: unit(0.0), 2: unit(0.8), 3: unit(1.6)}
    merged = dedup_merge(kps, embeddings)
    assert len(merged) == 3
    assert sum(m.effective_size for m in merged) == 12


def test_dedup_chain_is_transitive():
    # cos(k1,k2) >= .95, cos(k2,k3) >= .95 but cos(k1,k3) < .95: all merge.
    angle = 0.28
    kps = [kp(1, 1), kp(2, 2), kp(3, 3)]
    embeddings = {1: unit(0.0), 2: unit(angle), 3: unit(2 * angle)}
    assert cosine(embeddings[1], embeddings[2]) >= 0.95
    assert cosine(embeddings[2], embeddings[3]) >= 0.95
    assert cosine(embeddings[1], embeddings[3]) < 0.95
    merged = dedup_merge(kps, embeddings)
    assert len(merged) == 1
    assert merged[0].effective_size == 6


def test_dedup_survivors_pairwise_below_threshold():
    rng = np.random.default_rng(7)
    kps = [kp(i, int(rng.integers(1, 9))) for i in range(12)]
    embeddings = {i: rng.normal(size=6) for i in range(12)}
    merged = dedup_merge(kps, embeddings)
    reps = [embeddings[m.id] for m in merged]
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            assert cosine(reps[i], reps[j]) < 0.95
    assert sum(m.effective_size for m in merged) == sum(k.effective_size for k in kps)


def test_dedup_size_tie_keeps_lowest_id():
    kps = [kp(5, 3, text="five"), kp(2, 3, text="two")]
    embeddings = {5: unit(0.0), 2: unit(0.01)}
    merged = dedup_merge(kps, embeddings)
    assert merged[0].text == "two"
    assert merged[0].id == 2


def test_rank_and_truncate_by_size():
    kps = [kp(1, 6), kp(2, 4), kp(3, 5)]
    result = rank_and_truncate(kps, 2, "T", Stance.PRO)
    assert [k.effective_size for k in result.key_points] == [6, 5]
    assert [k.rank for k in result.key_points] == [1, 2]


def test_rank_keeps_all_when_n_large():
    kps = [kp(1, 6), kp(2, 4), kp(3, 5)]
    result = rank_and_truncate(kps, 10, "T", Stance.PRO)
    assert [k.effective_size for k in result.key_points] == [6, 5, 4]


def test_rank_tie_breaks_on_centrality_then_id():
    kps = [kp(1, 4, centrality=0.4), kp(2, 4, centrality=0.6), kp(3, 4, centrality=0.6)]
    result = rank_and_truncate(kps, 3, "T", Stance.PRO)
    assert [k.id for k in result.key_points] == [2, 3, 1]


def test_rank_invalid_n():
    with pytest.raises(StageError):
        rank_and_truncate([kp(1, 1)], 0, "T", Stance.PRO)
