"""End-to-end pipeline orchestration.

Stages: load corpus, attach embeddings, reduce per partition, density
cluster, iterative clustering of outliers, membership discretization,
key point generation, and evaluation against references. Each stage is
callable on its own (the CLI exposes them as subcommands) and
run_pipeline chains them, emitting clusters.jsonl, keypoints.jsonl,
report.json and a run manifest.

Artifacts are written under .partial names while the run is in flight
and renamed only when the whole run succeeds, so an aborted run leaves
its partial outputs behind for inspection.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import artifacts
from .artifacts import PartitionClusters, config_hash
from .corpus import Corpus, Partition, load_corpus, partition_corpus
from .embedding import EmbeddingStore, attach_embeddings, fetch_embeddings, load_embedding_file
from .errors import BackendError, InputError, KpaError, StageError
from .evaluation import (
    CosineEmbeddingScorer,
    RemotePairScorer,
    RougeScores,
    TOKENIZATION,
    optimal_match,
    rouge,
    soft_scores,
)
from .ic import IcConfig, iterative_assign
from .kpg import (
    DEDUP_THRESHOLD,
    ExtractiveBackend,
    GeneratedKeyPoint,
    KeyPointSet,
    RemoteBackend,
    assemble_prompt,
    dedup_merge,
    generate,
    rank_and_truncate,
)
from .kpm import KpmConfig, cluster, compute_gamma, discretize, membership
from .reduction import ReducerConfig, reduce as reduce_store
from .textrank import SimilarityGraph, TextRankConfig, order_cluster, textrank

log = logging.getLogger(__name__)


@dataclass
class KpgConfig:
    backend: str = "extractive"
    endpoint: str | None = None
    max_new_tokens: int = 64
    budget: int = 2000
    max_kps: int = 8
    allow_fallback: bool = False

    def __post_init__(self):
        if self.backend not in ("extractive", "remote"):
            raise StageError(f"unknown backend {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise StageError("remote backend requires an endpoint")


@dataclass
class EvalConfig:
    scorer: str = "cosine"
    endpoint: str | None = None
    metric: str = "token_overlap"

    def __post_init__(self):
        if self.scorer not in ("cosine", "remote"):
            raise StageError(f"unknown scorer {self.scorer!r}")
        if self.scorer == "remote" and not self.endpoint:
            raise StageError("remote scorer requires an endpoint")


@dataclass
class PipelineConfig:
    corpus_path: str = ""
    corpus_format: str | None = None
    references_path: str | None = None
    embeddings_source: str = ""
    reduced_embeddings_path: str | None = None
    reducer: ReducerConfig = field(default_factory=ReducerConfig)
    kpm: KpmConfig = field(default_factory=KpmConfig)
    ic: IcConfig = field(default_factory=IcConfig)
    kpg: KpgConfig = field(default_factory=KpgConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    out_dir: str = "out"
    jobs: int = 1

    def raw_clusters_slice(self) -> dict:
        return {"seed": self.seed, "reducer": asdict(self.reducer), "kpm": asdict(self.kpm)}

    def clusters_slice(self) -> dict:
        return {
            **self.raw_clusters_slice(),
            "ic": asdict(self.ic),
            "discretization": "post-ic",
        }

    def keypoints_slice(self) -> dict:
        return {
            "kpg": asdict(self.kpg),
            "dedup_threshold": DEDUP_THRESHOLD,
            "ranking": "effective_size,centrality,id",
        }

    def report_slice(self) -> dict:
        return {"eval": asdict(self.eval), "tokenization": TOKENIZATION}


def _map_partitions(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Stage: clustering


def _reduced_for(partition_args: list[str], store: EmbeddingStore, config: PipelineConfig,
                 reduced_override: EmbeddingStore | None) -> EmbeddingStore:
    """Per-partition reduced space, clamping target_dim to what the
    partition can support."""
    if reduced_override is not None:
        return reduced_override
    sub = EmbeddingStore({a: store[a] for a in partition_args})
    if config.reducer.method == "identity":
        return sub
    target = min(config.reducer.target_dim, sub.dim, len(partition_args))
    reducer = ReducerConfig(method=config.reducer.method, target_dim=target, seed=config.seed)
    return reduce_store(sub, reducer)


def cluster_partitions(
    corpus: Corpus,
    store: EmbeddingStore,
    config: PipelineConfig,
    reduced_override: EmbeddingStore | None = None,
) -> list[PartitionClusters]:
    """Density-cluster every partition in its reduced space."""
    partitions = partition_corpus(corpus)

    def one(partition: Partition) -> PartitionClusters:
        reduced = _reduced_for(list(partition.arg_ids), store, config, reduced_override)
        clusters = cluster(reduced, partition, config.kpm)
        return PartitionClusters(topic_id=partition.topic_id, stance=partition.stance, clusters=clusters)

    return _map_partitions(one, partitions, config.jobs)


# ---------------------------------------------------------------------------
# Stage: iterative clustering plus discretization


def ic_partitions(
    parts: list[PartitionClusters],
    store: EmbeddingStore,
    config: PipelineConfig,
    reduced_override: EmbeddingStore | None = None,
) -> list[PartitionClusters]:
    """Absorb outliers via iterative clustering, then discretize
    membership probabilities into secondary assignments."""

    def one(part: PartitionClusters) -> PartitionClusters:
        merged = iterative_assign(part.clusters, list(part.clusters.outliers), store, config.ic)
        all_args = merged.all_arg_ids()
        reduced = _reduced_for(all_args, store, config, reduced_override)
        vectors = membership(reduced, merged, config.kpm.tau)
        gamma = compute_gamma(vectors)
        assignment = discretize(vectors, gamma, merged)
        secondary: dict[int, list[str]] = {}
        structural = {a: {cid for cid, mem in merged.clusters.items() if a in mem} for a in all_args}
        for arg_id in all_args:
            for cid in sorted(assignment[arg_id] - structural[arg_id]):
                secondary.setdefault(cid, []).append(arg_id)
        return PartitionClusters(
            topic_id=part.topic_id,
            stance=part.stance,
            clusters=merged,
            secondary=secondary,
            gamma=gamma,
        )

    return _map_partitions(one, parts, config.jobs)


# ---------------------------------------------------------------------------
# Stage: key point generation


def _make_backend(config: PipelineConfig, store: EmbeddingStore):
    if config.kpg.backend == "remote":
        return RemoteBackend(config.kpg.endpoint, config.kpg.max_new_tokens)
    return ExtractiveBackend(store)


def _kp_embedding(text: str, prompt_ids: tuple[str, ...], corpus: Corpus,
                  store: EmbeddingStore) -> np.ndarray | None:
    for arg_id in prompt_ids:
        if corpus.arguments[arg_id].text == text:
            return store[arg_id]
    return None


def generate_partition(
    part: PartitionClusters,
    corpus: Corpus,
    store: EmbeddingStore,
    config: PipelineConfig,
    n_override: int | None,
) -> KeyPointSet:
    backend = _make_backend(config, store)
    fallback = ExtractiveBackend(store)
    topic_text = corpus.topics[part.topic_id].text
    kps: list[GeneratedKeyPoint] = []
    prompts: dict[int, tuple[str, ...]] = {}
    for kp_id, cid in enumerate(sorted(part.clusters.clusters)):
        members = part.combined_members(cid)
        ordered = order_cluster(members, store)
        pairs = [(arg_id, corpus.arguments[arg_id].text) for arg_id, _ in ordered]
        prompt = assemble_prompt(part.stance, topic_text, pairs, config.kpg.budget)
        try:
            text = generate(prompt, backend)
        except BackendError:
            if not config.kpg.allow_fallback:
                raise
            text = generate(prompt, fallback)
        prompts[kp_id] = prompt.arg_ids
        kps.append(
            GeneratedKeyPoint(
                id=kp_id, text=text, source_cluster_ids={cid}, effective_size=len(members)
            )
        )

    kp_embeddings: dict[int, np.ndarray] = {}
    pending: list[GeneratedKeyPoint] = []
    for kp in kps:
        vector = _kp_embedding(kp.text, prompts[kp.id], corpus, store)
        if vector is None:
            pending.append(kp)
        else:
            kp_embeddings[kp.id] = vector
    if pending:
        if not config.kpg.endpoint:
            raise BackendError("generated texts need a bridge endpoint for embedding")
        vectors = fetch_embeddings(config.kpg.endpoint, [kp.text for kp in pending])
        for kp, vec in zip(pending, vectors):
            kp_embeddings[kp.id] = np.asarray(vec, dtype=np.float64)

    # Key point centrality over the key point similarity graph.
    if len(kps) == 1:
        kps[0].centrality = 1.0
    else:
        kp_store = EmbeddingStore({str(kp.id): kp_embeddings[kp.id] for kp in kps})
        graph = SimilarityGraph.from_embeddings([str(kp.id) for kp in kps], kp_store)
        scores = textrank(graph, TextRankConfig())
        for kp in kps:
            kp.centrality = scores[str(kp.id)]

    merged = dedup_merge(kps, kp_embeddings, DEDUP_THRESHOLD)
    n = n_override if n_override is not None else config.kpg.max_kps
    return rank_and_truncate(merged, n, part.topic_id, part.stance)


def generate_partitions(
    parts: list[PartitionClusters],
    corpus: Corpus,
    store: EmbeddingStore,
    config: PipelineConfig,
) -> list[KeyPointSet]:
    ref_counts: dict[tuple[str, str], int] = {}
    if config.references_path:
        refs = load_reference_file(config.references_path)
        for key, texts in refs.items():
            ref_counts[key] = len(texts)

    def one(part: PartitionClusters) -> KeyPointSet:
        n = ref_counts.get(part.key)
        return generate_partition(part, corpus, store, config, n if n else None)

    return _map_partitions(one, parts, config.jobs)


def load_reference_file(path: str | Path) -> dict[tuple[str, str], list[str]]:
    """Reference key point texts keyed by (topic, stance), in file order."""
    ref_corpus = _load_reference_corpus(Path(path))
    grouped: dict[tuple[str, str], list[str]] = {}
    for kp in ref_corpus.reference_kps.values():
        grouped.setdefault((kp.topic_id, kp.stance.value), []).append(kp.text)
    return grouped


def _load_reference_corpus(path: Path) -> Corpus:
    # Reference files reuse the key point schema but stand alone, so they
    # are parsed without the corpus-level argument requirement.
    from .corpus import _KP_COLUMNS, _add_key_point, _read_csv_rows
    import json as _json

    corpus = Corpus()
    if not path.exists():
        raise InputError(f"references path does not exist: {path}")
    if path.suffix.lower() == ".csv":
        for lineno, row in _read_csv_rows(path, _KP_COLUMNS):
            _add_key_point(corpus, row, f"{path}:{lineno}")
    else:
        with path.open(encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                row = _json.loads(line)
                if _KP_COLUMNS <= set(row):
                    _add_key_point(corpus, row, f"{path}:{lineno}")
    if not corpus.reference_kps:
        raise InputError(f"{path}: no reference key points found")
    return corpus


# ---------------------------------------------------------------------------
# Stage: evaluation


def _make_scorer(config: EvalConfig):
    if config.scorer == "remote":
        return RemotePairScorer(config.endpoint, config.metric)
    return CosineEmbeddingScorer()


def evaluate_keypoints(
    candidates: dict[tuple[str, str], list[dict]],
    references: dict[tuple[str, str], list[str]],
    eval_config: EvalConfig,
) -> dict:
    """Build the evaluation report for candidate rows grouped by partition."""
    missing_refs = sorted(set(candidates) - set(references))
    if missing_refs:
        raise StageError(f"partition missing references: {missing_refs}")
    missing_cands = sorted(set(references) - set(candidates))
    if missing_cands:
        raise StageError(f"partition missing candidates: {missing_cands}")
    if not candidates:
        raise StageError("no partitions to evaluate")

    scorer = _make_scorer(eval_config)
    per_partition = []
    rouge_list: list[RougeScores] = []
    soft_list = []
    match_totals = []
    for key in sorted(candidates):
        cand_texts = [row["text"] for row in candidates[key]]
        ref_texts = references[key]
        part_rouge = rouge(" ".join(cand_texts), " ".join(ref_texts))
        part_soft = soft_scores(cand_texts, ref_texts, scorer)
        entry = {
            "topic": key[0],
            "stance": key[1],
            "rouge": {"r1": part_rouge.r1, "r2": part_rouge.r2, "rl": part_rouge.rl},
            "soft": {"sP": part_soft.sP, "sR": part_soft.sR, "sF1": part_soft.sF1},
            "optimal_match_total": None,
        }
        if len(cand_texts) == len(ref_texts):
            result = optimal_match(cand_texts, ref_texts, scorer)
            entry["optimal_match_total"] = result.total
            match_totals.append(result.total)
        rouge_list.append(part_rouge)
        soft_list.append(part_soft)
        per_partition.append(entry)

    averages = {
        "rouge": {
            "r1": float(np.mean([s.r1 for s in rouge_list])),
            "r2": float(np.mean([s.r2 for s in rouge_list])),
            "rl": float(np.mean([s.rl for s in rouge_list])),
        },
        "soft": {
            "sP": float(np.mean([s.sP for s in soft_list])),
            "sR": float(np.mean([s.sR for s in soft_list])),
            "sF1": float(np.mean([s.sF1 for s in soft_list])),
        },
        "optimal_match_total": float(np.mean(match_totals)) if match_totals else None,
    }
    return {
        "per_partition": per_partition,
        "averages": averages,
        "config_echo": {
            "scorer": eval_config.scorer,
            "metric": eval_config.metric,
            "scorer_range": list(scorer.declared_range),
            "tokenization": TOKENIZATION,
        },
    }


# ---------------------------------------------------------------------------
# Full run


class _StageClock:
    def __init__(self):
        self.timings: list[dict] = []

    def run(self, name: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except KpaError as exc:
            raise type(exc)(f"stage {name!r}: {exc}") from exc
        self.timings.append({"stage": name, "seconds": round(time.perf_counter() - start, 4)})
        return result


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and emit clusters.jsonl, keypoints.jsonl,
    report.json (when references are given) and manifest.json."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clock = _StageClock()
    partial: dict[str, Path] = {}

    corpus = clock.run("load_corpus", lambda: load_corpus(config.corpus_path, config.corpus_format))
    store = clock.run("attach_embeddings", lambda: attach_embeddings(corpus, config.embeddings_source))
    reduced_override = None
    if config.reduced_embeddings_path:
        reduced_override = clock.run(
            "load_reduced", lambda: load_embedding_file(config.reduced_embeddings_path)
        )

    clustered = clock.run("cluster", lambda: cluster_partitions(corpus, store, config, reduced_override))
    refined = clock.run("ic", lambda: ic_partitions(clustered, store, config, reduced_override))

    clusters_path = out_dir / "clusters.jsonl.partial"
    artifacts.write_clusters(
        clusters_path, refined, {"config_hash": config_hash(config.clusters_slice())}
    )
    partial["clusters.jsonl"] = clusters_path

    kp_sets = clock.run("generate", lambda: generate_partitions(refined, corpus, store, config))
    keypoints_path = out_dir / "keypoints.jsonl.partial"
    artifacts.write_keypoints(
        keypoints_path, kp_sets, {"config_hash": config_hash(config.keypoints_slice())}
    )
    partial["keypoints.jsonl"] = keypoints_path

    report = None
    if config.references_path:
        references = clock.run("load_references", lambda: load_reference_file(config.references_path))
        grouped = {
            (ks.topic_id, ks.stance.value): [
                {"text": kp.text, "rank": kp.rank} for kp in ks.key_points
            ]
            for ks in kp_sets
        }
        report = clock.run("evaluate", lambda: evaluate_keypoints(grouped, references, config.eval))
        report["config_hash"] = config_hash(config.report_slice())
        report_path = out_dir / "report.json.partial"
        artifacts.write_json(report_path, report)
        partial["report.json"] = report_path

    for final_name, tmp_path in partial.items():
        os.replace(tmp_path, out_dir / final_name)

    summary = {
        "config_hash": config_hash(config.clusters_slice()),
        "config_echo": asdict(config),
        "partitions": [
            {
                "topic": part.topic_id,
                "stance": part.stance.value,
                "clusters": part.clusters.count,
                "gamma": part.gamma,
                "key_points": len(kp_set.key_points),
            }
            for part, kp_set in zip(refined, kp_sets)
        ],
        "stage_timings": clock.timings,
        "outputs": sorted(partial),
    }
    artifacts.write_json(out_dir / "manifest.json", summary)
    return summary


def sweep_lambda(config: PipelineConfig, lambdas: list[float]) -> list[dict]:
    """Rerun the pipeline once per threshold, collecting one report row each."""
    if not lambdas:
        raise StageError("empty sweep")
    rows = []
    base_out = Path(config.out_dir)
    for lam in lambdas:
        run_config = replace(
            config,
            ic=replace(config.ic, threshold=lam),
            out_dir=str(base_out / f"lambda_{lam:g}"),
        )
        summary = run_pipeline(run_config)
        row = {
            "lambda": lam,
            "clusters": sum(p["clusters"] for p in summary["partitions"]),
            "key_points": sum(p["key_points"] for p in summary["partitions"]),
        }
        report_path = Path(run_config.out_dir) / "report.json"
        if report_path.exists():
            import json as _json

            report = _json.loads(report_path.read_text(encoding="utf-8"))
            row["rouge"] = report["averages"]["rouge"]
            row["soft"] = report["averages"]["soft"]
        rows.append(row)
    artifacts.write_jsonl(
        base_out / "sweep.jsonl",
        rows,
        {"config_hash": config_hash({"lambdas": lambdas, **config.clusters_slice()})},
    )
    return rows
