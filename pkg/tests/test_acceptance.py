"""Acceptance suite: one test per release criterion, each printing a
pass line with its measured evidence. Run with `pytest tests/test_acceptance.py -s`.
"""

import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from kpakit.cli import main as cli_main
from kpakit.embedding import EmbeddingStore, cosine
from kpakit.evaluation import assign_optimal, rouge, soft_scores, spearman
from kpakit.ic import IcConfig, iterative_assign
from kpakit.kpm import ClusterSet, KpmConfig, cluster, compute_gamma, discretize, membership
from kpakit.corpus import Partition, Stance
from kpakit.textrank import SimilarityGraph, textrank

from conftest import StubScorer, make_blobs, store_from_points

DATA = Path(__file__).resolve().parent.parent / "data" / "mini"


def _report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"[acceptance] {name}: PASS{suffix}")


def test_soft_metric_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(100)

    # Worked example at 1e-9.
    scorer = StubScorer({("c1", "r1"): 0.9, ("c1", "r2"): 0.4})
    result = soft_scores(["c1"], ["r1", "r2"], scorer)
    assert abs(result.sP - 0.9) < 1e-9
    assert abs(result.sR - 0.65) < 1e-9
    assert abs(result.sF1 - 0.7548387096774194) < 1e-9

    for trial in range(500):
        n, m = int(rng.integers(1, 11)), int(rng.integers(1, 11))
        cands = [f"c{trial}_{i}" for i in range(n)]
        refs = [f"r{trial}_{j}" for j in range(m)]
        table = {}
        for x in cands + refs:
            for y in cands + refs:
                if (y, x) in table:
                    table[(x, y)] = table[(y, x)]
                else:
                    table[(x, y)] = float(rng.uniform())
        bounded = StubScorer(table)
        bounded.symmetric = True
        scores = soft_scores(cands, refs, bounded)
        assert 0.0 <= scores.sP <= 1.0 and 0.0 <= scores.sR <= 1.0 and 0.0 <= scores.sF1 <= 1.0

        perm_c = [cands[k] for k in rng.permutation(n)]
        perm_r = [refs[k] for k in rng.permutation(m)]
        assert soft_scores(perm_c, perm_r, bounded) == scores  # permutation invariance, exact

        swapped = soft_scores(refs, cands, bounded)
        assert swapped.sR == scores.sP and swapped.sP == scores.sR  # duality, exact

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _report("soft-metric suite", f"500 set pairs in {elapsed:.2f}s")


def test_assignment_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(200)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        matrix = rng.uniform(size=(n, n))
        result = assign_optimal(matrix)
        best = -np.inf
        for perm in itertools.permutations(range(n)):
            total = 0.0
            for i in range(n):
                total += matrix[i, perm[i]]
            best = max(best, total)
        assert result.total == best  # exact
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report("assignment oracle", f"200 matrices in {elapsed:.2f}s")


def test_rouge_oracle():
    scores = rouge("the cat sat", "the cat ran")
    assert abs(scores.r1 - 2 / 3) < 1e-12
    assert abs(scores.r2 - 1 / 2) < 1e-12
    assert abs(scores.rl - 2 / 3) < 1e-12

    rng = np.random.default_rng(300)
    vocab = ["w0", "w1", "w2", "w3"]

    def ngrams(seq, n):
        return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]

    def clipped_f(cand, ref, n):
        overlap, pool = 0, list(ngrams(ref, n))
        for gram in ngrams(cand, n):
            if gram in pool:
                overlap += 1
                pool.remove(gram)
        p = overlap / len(ngrams(cand, n)) if ngrams(cand, n) else 0.0
        r = overlap / len(ngrams(ref, n)) if ngrams(ref, n) else 0.0
        return 2 * p * r / (p + r) if p + r else 0.0

    def lcs(a, b):
        if not a or not b:
            return 0
        if a[-1] == b[-1]:
            return 1 + lcs(a[:-1], b[:-1])
        return max(lcs(a[:-1], b), lcs(a, b[:-1]))

    for _ in range(100):
        cand = [vocab[k] for k in rng.integers(0, 4, size=rng.integers(1, 9))]
        ref = [vocab[k] for k in rng.integers(0, 4, size=rng.integers(1, 9))]
        mine = rouge(" ".join(cand), " ".join(ref))
        assert mine.r1 == clipped_f(cand, ref, 1)
        assert mine.r2 == clipped_f(cand, ref, 2)
        length = lcs(tuple(cand), tuple(ref))
        p, r = length / len(cand), length / len(ref)
        assert mine.rl == (2 * p * r / (p + r) if p + r else 0.0)
    _report("rouge oracle", "100 sequences, exact")


def test_textrank_criteria():
    rng = np.random.default_rng(400)
    for _ in range(100):
        weights = rng.uniform(size=(50, 50))
        weights = (weights + weights.T) / 2
        np.fill_diagonal(weights, 0.0)
        graph = SimilarityGraph.build([f"n{i}" for i in range(50)], weights)
        scores = textrank(graph)
        assert abs(sum(scores.values()) - 1.0) < 1e-9

    for n in (4, 7, 10):
        weights = np.full((n, n), 0.8)
        np.fill_diagonal(weights, 0.0)
        scores = textrank(SimilarityGraph.build([f"n{i}" for i in range(n)], weights))
        assert len(set(scores.values())) == 1  # exactly uniform

    chain = SimilarityGraph.build(
        ["n0", "n1", "n2"], np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    )
    scores = textrank(chain)
    assert scores["n1"] > scores["n0"] and scores["n1"] > scores["n2"]
    _report("textrank", "100 graphs, uniform exact, chain fixture")


def test_clustering_criteria():
    recovered = 0
    for seed in range(10):
        points, truth = make_blobs(seed=seed, sizes=(6, 6))
        store = store_from_points(points)
        ids = sorted(store.ids)
        partition = Partition(topic_id="T", stance=Stance.PRO, arg_ids=tuple(ids))
        result = cluster(store, partition, KpmConfig(min_cluster_size=3))
        assert result.count == 2
        assert result.outliers == []
        labels = {}
        for cid, members in result.clusters.items():
            for arg in members:
                labels[arg] = cid
        assert adjusted_rand_score(truth, [labels[a] for a in ids]) == 1.0
        recovered += 1
    assert recovered == 10

    rng = np.random.default_rng(500)
    blob = rng.normal(scale=0.05, size=(6, 2))
    points = np.vstack([blob, [[25.0, 25.0]]])
    store = store_from_points(points)
    ids = sorted(store.ids)
    partition = Partition(topic_id="T", stance=Stance.PRO, arg_ids=tuple(ids))
    result = cluster(store, partition, KpmConfig(min_cluster_size=3))
    assert result.count == 1
    assert len(result.outliers) == 1
    _report("clustering", "10/10 two-blob seeds ARI 1.0, isolated point single outlier")


def test_discretization_criteria():
    rng = np.random.default_rng(600)
    for _ in range(30):
        n_points = int(rng.integers(8, 20))
        points = rng.normal(size=(n_points, 3))
        store = store_from_points(points)
        ids = sorted(store.ids)
        n_clusters = int(rng.integers(1, 5))
        bounds = sorted(rng.choice(np.arange(1, n_points), size=n_clusters - 1, replace=False).tolist()) if n_clusters > 1 else []
        slices = np.split(np.array(ids), bounds)
        n_outliers = int(rng.integers(0, min(3, len(slices[-1]))))
        outliers = slices[-1][len(slices[-1]) - n_outliers :].tolist() if n_outliers else []
        clusters = {}
        for cid, chunk in enumerate(slices):
            members = [a for a in chunk.tolist() if a not in outliers]
            if members:
                clusters[cid] = members
        cluster_set = ClusterSet(clusters=clusters, outliers=outliers)

        vectors = membership(store, cluster_set, tau=0.8)
        gamma = compute_gamma(vectors)
        oracle = float(np.mean([
            sorted(v.probs.values())[-2] if len(v.probs) >= 2 else 0.0 for v in vectors
        ]))
        assert abs(gamma - oracle) < 1e-12

        assignment = discretize(vectors, gamma, cluster_set)
        by_id = {v.arg_id: v for v in vectors}
        for arg_id, chosen in assignment.items():
            if arg_id in outliers:
                assert chosen == set()
                continue
            assert len(chosen) >= 1
            probs = by_id[arg_id].probs
            best_p = max(probs.values())
            best = min(c for c, p in probs.items() if p == best_p)
            for cid in chosen - {best}:
                assert probs[cid] >= gamma
    _report("discretization", "30 random fixtures, gamma exact to 1e-12")


def test_iterative_clustering_limit_laws():
    rng = np.random.default_rng(700)
    store = EmbeddingStore({f"x{i:02d}": rng.normal(size=8) for i in range(24)})
    ids = sorted(store.ids)
    initial = ClusterSet(clusters={0: ids[:4], 1: ids[4:8], 2: ids[8:12]})
    unmatched = ids[12:]

    above = iterative_assign(initial, list(unmatched), store, IcConfig(threshold=1.01))
    assert above.count == 3 + len(unmatched)
    assert above.outliers == []

    floor = iterative_assign(initial, list(unmatched), store, IcConfig(threshold=-1.0))
    assert floor.count == 3
    assert floor.outliers == []

    big_store = EmbeddingStore({f"y{i:04d}": rng.normal(size=16) for i in range(1000)})
    big_ids = sorted(big_store.ids)
    big_clusters = ClusterSet(clusters={0: big_ids[:10], 1: big_ids[10:20]})
    start = time.perf_counter()
    result = iterative_assign(big_clusters, big_ids[20:], big_store, IcConfig(threshold=0.9))
    elapsed = time.perf_counter() - start
    assert result.outliers == []
    assert elapsed < 1.0
    _report("iterative clustering limit laws", f"1000-argument IC in {elapsed:.2f}s")


def test_end_to_end_smoke(tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    start = time.perf_counter()
    code = cli_main([
        "run",
        "--corpus", str(DATA),
        "--embeddings", str(DATA / "embeddings.jsonl"),
        "--references", str(DATA / "key_points.csv"),
        "--out-dir", str(first),
        "--seed", "0",
    ])
    elapsed = time.perf_counter() - start
    assert code == 0
    assert elapsed < 10.0

    lines = (first / "keypoints.jsonl").read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in lines[1:]]
    by_partition = {}
    for row in rows:
        by_partition.setdefault((row["topic"], row["stance"]), []).append(row)
    assert len(by_partition) == 4
    max_kps = 8
    embeddings = {
        json.loads(line)["id"]: np.array(json.loads(line)["vector"])
        for line in (DATA / "embeddings.jsonl").read_text(encoding="utf-8").splitlines()
    }
    corpus_texts = {}
    import csv as csv_mod

    with (DATA / "arguments.csv").open(encoding="utf-8") as handle:
        for arg_row in csv_mod.DictReader(handle):
            corpus_texts[arg_row["argument"]] = arg_row["arg_id"]
    for key, group in by_partition.items():
        assert len(group) <= max_kps
        for row in group:
            assert len(row["source_clusters"]) >= 1
        # Dedup survivors pairwise below 0.95 (extractive texts map to
        # argument embeddings).
        vectors = [embeddings[corpus_texts[row["text"]]] for row in group]
        for i in range(len(vectors)):
            for j in range(i + 1, len(vectors)):
                assert cosine(vectors[i], vectors[j]) < 0.95

    code = cli_main([
        "run",
        "--corpus", str(DATA),
        "--embeddings", str(DATA / "embeddings.jsonl"),
        "--references", str(DATA / "key_points.csv"),
        "--out-dir", str(second),
        "--seed", "0",
    ])
    assert code == 0
    for name in ("clusters.jsonl", "keypoints.jsonl", "report.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    sweep_dir = tmp_path / "sweep"
    code = cli_main([
        "sweep",
        "--corpus", str(DATA),
        "--embeddings", str(DATA / "embeddings.jsonl"),
        "--references", str(DATA / "key_points.csv"),
        "--out-dir", str(sweep_dir),
        "--seed", "0",
        "--lambda-range", "0.6:0.9:0.1",
    ])
    assert code == 0
    sweep_lines = (sweep_dir / "sweep.jsonl").read_text(encoding="utf-8").splitlines()
    sweep_rows = [json.loads(line) for line in sweep_lines[1:]]
    assert [row["lambda"] for row in sweep_rows] == [0.6, 0.7, 0.8, 0.9]
    _report("end-to-end smoke", f"pipeline in {elapsed:.2f}s, sweep rows 4")


def test_spearman_criteria():
    assert spearman([1.0, 2.0, 3.0, 4.0], [2.0, 5.0, 7.0, 11.0]) == 1.0
    assert spearman([1.0, 2.0, 3.0, 4.0], [11.0, 7.0, 5.0, 2.0]) == -1.0

    def oracle(x, y):
        def ranks(values):
            out = []
            for v in values:
                less = sum(1 for w in values if w < v)
                equal = sum(1 for w in values if w == v)
                out.append(less + (equal + 1) / 2)
            return np.array(out)

        rx, ry = ranks(x), ranks(y)
        rx = rx - rx.mean()
        ry = ry - ry.mean()
        return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))

    rng = np.random.default_rng(800)
    checked = 0
    while checked < 40:
        n = int(rng.integers(3, 15))
        x = rng.integers(0, 6, size=n).astype(float).tolist()
        y = rng.integers(0, 6, size=n).astype(float).tolist()
        if len(set(x)) == 1 or len(set(y)) == 1:
            continue
        assert spearman(x, y) == pytest.approx(oracle(x, y), abs=1e-12)
        checked += 1
    _report("spearman", "exact limits, 40 tie fixtures to 1e-12")
