"""Command line interface.

Subcommands expose the pipeline stages individually (cluster, ic,
generate, evaluate, sweep, filter-augment) and as a whole (run). A JSON
config file can carry any flag value; explicit flags win. Exit codes:
0 success, 1 usage error, 2 input error, 3 stage failure, 4 backend or
bridge failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import artifacts, pipeline
from .augment import dump_pairs, load_pairs, quality_filter, quality_filter_per_topic
from .corpus import load_corpus
from .embedding import attach_embeddings, load_embedding_file
from .errors import BackendError, InputError, KpaError
from .ic import IcConfig
from .kpm import KpmConfig
from .pipeline import EvalConfig, KpgConfig, PipelineConfig, run_pipeline, sweep_lambda
from .reduction import ReducerConfig

log = logging.getLogger("kpakit")

ENV_BRIDGE_URL = "KPA_BRIDGE_URL"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this artifact reserves 2 for input errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--corpus", help="corpus path (CSV directory/file or JSONL)")
    parser.add_argument("--format", choices=["csv", "jsonl"], help="corpus format (default: by extension)")
    parser.add_argument("--references", help="reference key point file (CSV or JSONL)")
    parser.add_argument("--embeddings", help="embedding JSONL file or bridge base URL")
    parser.add_argument("--reduced-embeddings", help="externally reduced embedding JSONL file")
    parser.add_argument("--reducer", choices=["identity", "pca"])
    parser.add_argument("--target-dim", type=int)
    parser.add_argument("--cluster-method", choices=["hdbscan", "kmeans"])
    parser.add_argument("--min-cluster-size", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--lambda", dest="threshold", type=float, help="iterative clustering threshold")
    parser.add_argument("--anchor", choices=["centroid", "mean_pairwise"])
    parser.add_argument("--kernel", choices=["cosine", "dot"])
    parser.add_argument("--backend", choices=["extractive", "remote"])
    parser.add_argument("--endpoint", help=f"bridge base URL (or ${ENV_BRIDGE_URL})")
    parser.add_argument("--max-new-tokens", type=int)
    parser.add_argument("--budget", type=int, help="prompt character budget")
    parser.add_argument("--max-kps", type=int)
    parser.add_argument("--allow-fallback", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--scorer", choices=["cosine", "remote"])
    parser.add_argument("--metric", help="remote scorer metric name")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", help="output directory")
    parser.add_argument("--jobs", type=int, help="partition-level parallelism")
    parser.add_argument("--verbose", action="store_true")


_DEFAULTS = {
    "corpus": None,
    "format": None,
    "references": None,
    "embeddings": None,
    "reduced_embeddings": None,
    "reducer": "pca",
    "target_dim": 5,
    "cluster_method": "hdbscan",
    "min_cluster_size": 3,
    "k": 5,
    "tau": 1.0,
    "threshold": 0.9,
    "anchor": "centroid",
    "kernel": "cosine",
    "backend": "extractive",
    "endpoint": None,
    "max_new_tokens": 64,
    "budget": 2000,
    "max_kps": 8,
    "allow_fallback": False,
    "scorer": "cosine",
    "metric": "token_overlap",
    "seed": 0,
    "out_dir": "out",
    "jobs": 1,
}


def _settings(args: argparse.Namespace) -> dict:
    """Merge flag values over config file values over defaults."""
    from_file: dict = {}
    if getattr(args, "config", None):
        config_path = Path(args.config)
        if not config_path.exists():
            raise InputError(f"config file does not exist: {config_path}")
        try:
            from_file = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{config_path}: malformed JSON ({exc.msg})") from exc
        from_file = {str(k).replace("-", "_"): v for k, v in from_file.items()}
        if "lambda" in from_file:
            from_file["threshold"] = from_file.pop("lambda")

    merged = dict(_DEFAULTS)
    for key in merged:
        if key in from_file and from_file[key] is not None:
            merged[key] = from_file[key]
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if merged["endpoint"] is None:
        merged["endpoint"] = os.environ.get(ENV_BRIDGE_URL)
    return merged


def _pipeline_config(settings: dict) -> PipelineConfig:
    if not settings["corpus"]:
        raise InputError("a corpus path is required (--corpus)")
    if not settings["embeddings"]:
        raise InputError("an embedding source is required (--embeddings)")
    return PipelineConfig(
        corpus_path=settings["corpus"],
        corpus_format=settings["format"],
        references_path=settings["references"],
        embeddings_source=settings["embeddings"],
        reduced_embeddings_path=settings["reduced_embeddings"],
        reducer=ReducerConfig(
            method=settings["reducer"], target_dim=settings["target_dim"], seed=settings["seed"]
        ),
        kpm=KpmConfig(
            method=settings["cluster_method"],
            min_cluster_size=settings["min_cluster_size"],
            k=settings["k"],
            tau=settings["tau"],
            seed=settings["seed"],
        ),
        ic=IcConfig(
            threshold=settings["threshold"], anchor_mode=settings["anchor"], kernel=settings["kernel"]
        ),
        kpg=KpgConfig(
            backend=settings["backend"],
            endpoint=settings["endpoint"],
            max_new_tokens=settings["max_new_tokens"],
            budget=settings["budget"],
            max_kps=settings["max_kps"],
            allow_fallback=bool(settings["allow_fallback"]),
        ),
        eval=EvalConfig(
            scorer=settings["scorer"], endpoint=settings["endpoint"], metric=settings["metric"]
        ),
        seed=settings["seed"],
        out_dir=settings["out_dir"],
        jobs=settings["jobs"],
    )


def _load_inputs(config: PipelineConfig):
    corpus = load_corpus(config.corpus_path, config.corpus_format)
    store = attach_embeddings(corpus, config.embeddings_source)
    reduced = load_embedding_file(config.reduced_embeddings_path) if config.reduced_embeddings_path else None
    return corpus, store, reduced


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_run(args) -> int:
    config = _pipeline_config(_settings(args))
    summary = run_pipeline(config)
    for part in summary["partitions"]:
        print(
            f"{part['topic']} / {part['stance']}: {part['clusters']} clusters, "
            f"{part['key_points']} key points"
        )
    print(f"outputs in {config.out_dir}: {', '.join(summary['outputs'])}")
    return 0


def _cmd_cluster(args) -> int:
    config = _pipeline_config(_settings(args))
    corpus, store, reduced = _load_inputs(config)
    parts = pipeline.cluster_partitions(corpus, store, config, reduced)
    out = Path(args.out or Path(config.out_dir) / "clusters_raw.jsonl")
    artifacts.write_clusters(
        out, parts, {"config_hash": artifacts.config_hash(config.raw_clusters_slice())}
    )
    n_out = sum(len(p.clusters.outliers) for p in parts)
    print(f"wrote {out}: {sum(p.clusters.count for p in parts)} clusters, {n_out} outliers")
    return 0


def _cmd_ic(args) -> int:
    config = _pipeline_config(_settings(args))
    corpus, store, reduced = _load_inputs(config)
    _, parts = artifacts.read_clusters(args.clusters)
    refined = pipeline.ic_partitions(parts, store, config, reduced)
    out = Path(args.out or Path(config.out_dir) / "clusters.jsonl")
    artifacts.write_clusters(out, refined, {"config_hash": artifacts.config_hash(config.clusters_slice())})
    print(f"wrote {out}: {sum(p.clusters.count for p in refined)} clusters, 0 outliers")
    return 0


def _cmd_generate(args) -> int:
    config = _pipeline_config(_settings(args))
    corpus, store, _ = _load_inputs(config)
    _, parts = artifacts.read_clusters(args.clusters)
    kp_sets = pipeline.generate_partitions(parts, corpus, store, config)
    out = Path(args.out or Path(config.out_dir) / "keypoints.jsonl")
    artifacts.write_keypoints(out, kp_sets, {"config_hash": artifacts.config_hash(config.keypoints_slice())})
    print(f"wrote {out}: {sum(len(ks.key_points) for ks in kp_sets)} key points")
    return 0


def _cmd_evaluate(args) -> int:
    settings = _settings(args)
    if not settings["references"]:
        raise InputError("evaluate requires --references")
    eval_config = EvalConfig(
        scorer=settings["scorer"], endpoint=settings["endpoint"], metric=settings["metric"]
    )
    _, candidates = artifacts.read_keypoints(args.candidates)
    references = pipeline.load_reference_file(settings["references"])
    report = pipeline.evaluate_keypoints(candidates, references, eval_config)
    report["config_hash"] = artifacts.config_hash(
        {"eval": {"scorer": eval_config.scorer, "endpoint": eval_config.endpoint, "metric": eval_config.metric}}
    )
    out = Path(args.out or Path(settings["out_dir"]) / "report.json")
    artifacts.write_json(out, report)
    avg = report["averages"]
    print(
        f"wrote {out}: R-1 {avg['rouge']['r1']:.4f} R-2 {avg['rouge']['r2']:.4f} "
        f"R-L {avg['rouge']['rl']:.4f} sF1 {avg['soft']['sF1']:.4f}"
    )
    return 0


def _parse_lambda_range(spec: str) -> list[float]:
    try:
        start, stop, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise InputError(f"bad --lambda-range {spec!r}, expected start:stop:step") from None
    if step <= 0:
        raise InputError("lambda-range step must be positive")
    values = []
    k = 0
    while True:
        value = round(start + k * step, 10)
        if value > stop + 1e-9:
            break
        values.append(value)
        k += 1
    return values


def _cmd_sweep(args) -> int:
    config = _pipeline_config(_settings(args))
    lambdas = _parse_lambda_range(args.lambda_range)
    if not lambdas:
        raise InputError("empty sweep")
    rows = sweep_lambda(config, lambdas)
    for row in rows:
        scores = ""
        if "rouge" in row:
            scores = (
                f" R-1 {row['rouge']['r1']:.4f} R-2 {row['rouge']['r2']:.4f}"
                f" R-L {row['rouge']['rl']:.4f}"
            )
        print(f"lambda {row['lambda']:g}: {row['clusters']} clusters, {row['key_points']} key points{scores}")
    print(f"wrote {Path(config.out_dir) / 'sweep.jsonl'}: {len(rows)} rows")
    return 0


def _cmd_filter_augment(args) -> int:
    settings = _settings(args)
    pairs = load_pairs(args.pairs)
    scorer = pipeline._make_scorer(
        EvalConfig(scorer=settings["scorer"], endpoint=settings["endpoint"], metric=settings["metric"])
    )
    drop = args.drop_fraction if args.drop_fraction is not None else 0.25
    if args.per_topic:
        kept = quality_filter_per_topic(pairs, scorer, drop)
    else:
        kept = quality_filter(pairs, scorer, drop)
    out = Path(args.out or Path(settings["out_dir"]) / "filtered_pairs.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_pairs(kept, out)
    print(f"wrote {out}: kept {len(kept)} of {len(pairs)} pairs")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="kpakit", description="Key point analysis pipeline and evaluation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[], help="run the full pipeline")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cluster = sub.add_parser("cluster", help="density-cluster each partition")
    _add_common(p_cluster)
    p_cluster.add_argument("--out", help="output clusters file")
    p_cluster.set_defaults(func=_cmd_cluster)

    p_ic = sub.add_parser("ic", help="iterative clustering of outliers plus discretization")
    _add_common(p_ic)
    p_ic.add_argument("--clusters", required=True, help="clusters file from the cluster step")
    p_ic.add_argument("--out", help="output clusters file")
    p_ic.set_defaults(func=_cmd_ic)

    p_gen = sub.add_parser("generate", help="generate, dedup and rank key points")
    _add_common(p_gen)
    p_gen.add_argument("--clusters", required=True, help="clusters file from the ic step")
    p_gen.add_argument("--out", help="output key points file")
    p_gen.set_defaults(func=_cmd_generate)

    p_eval = sub.add_parser("evaluate", help="score candidate key points against references")
    _add_common(p_eval)
    p_eval.add_argument("--candidates", required=True, help="keypoints.jsonl to evaluate")
    p_eval.add_argument("--out", help="output report file")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="rerun the pipeline over a lambda grid")
    _add_common(p_sweep)
    p_sweep.add_argument("--lambda-range", required=True, help="start:stop:step, stop inclusive")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_filter = sub.add_parser("filter-augment", help="quality-filter augmented pairs")
    _add_common(p_filter)
    p_filter.add_argument("--pairs", required=True, help="augmented pairs JSONL")
    p_filter.add_argument("--out", help="output pairs file")
    p_filter.add_argument("--drop-fraction", type=float, default=None)
    p_filter.add_argument("--per-topic", action="store_true")
    p_filter.set_defaults(func=_cmd_filter_augment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KpaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - unexpected failure
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
