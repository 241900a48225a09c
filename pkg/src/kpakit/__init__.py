"""Key point analysis pipeline and set-level evaluation toolkit."""

from .corpus import Corpus, Partition, Stance, load_corpus, partition_corpus
from .embedding import EmbeddingStore, attach_embeddings, centroid, cosine, medoid, similarity_matrix
from .errors import BackendError, CorpusError, EmbeddingError, InputError, KpaError, StageError
from .evaluation import (
    AssignmentResult,
    RougeScores,
    SoftScores,
    corpus_rouge,
    optimal_match,
    rouge,
    soft_scores,
    spearman,
)
from .ic import Anchor, IcConfig, compute_anchor, iterative_assign
from .kpg import (
    GeneratedKeyPoint,
    KeyPointSet,
    Prompt,
    assemble_prompt,
    dedup_merge,
    generate,
    rank_and_truncate,
)
from .kpm import (
    ClusterSet,
    KpmConfig,
    MembershipVector,
    cluster,
    compute_gamma,
    discretize,
    membership,
)
from .pipeline import PipelineConfig, run_pipeline, sweep_lambda
from .reduction import ReducerConfig, reduce
from .textrank import SimilarityGraph, TextRankConfig, order_cluster, textrank

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
