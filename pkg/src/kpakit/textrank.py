"""Similarity-weighted PageRank over sentence graphs.

Nodes are arguments (or generated key points); edge weights are cosine
similarities clamped to [0, 1] with a zero diagonal. Scores come from
damped power iteration with uniform teleport; rows with no outgoing
weight redistribute uniformly. Used both to order arguments inside a
cluster and to score key point centrality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import EmbeddingStore, similarity_matrix
from .errors import StageError


@dataclass(frozen=True)
class TextRankConfig:
    damping: float = 0.85
    tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise StageError("damping must lie strictly between 0 and 1")


@dataclass(frozen=True)
class SimilarityGraph:
    node_ids: tuple[str, ...]
    weights: np.ndarray  # symmetric, non-negative, zero diagonal

    @classmethod
    def build(cls, node_ids: Sequence[str], weights: np.ndarray) -> "SimilarityGraph":
        weights = np.asarray(weights, dtype=np.float64)
        n = len(node_ids)
        if weights.shape != (n, n):
            raise StageError(f"weight matrix shape {weights.shape} does not match {n} nodes")
        if not np.allclose(weights, weights.T, atol=1e-9):
            raise StageError("weight matrix must be symmetric")
        weights = np.clip(weights, 0.0, 1.0)
        np.fill_diagonal(weights, 0.0)
        return cls(node_ids=tuple(node_ids), weights=weights)

    @classmethod
    def from_embeddings(cls, node_ids: Sequence[str], store: EmbeddingStore) -> "SimilarityGraph":
        sims = similarity_matrix(store.matrix(node_ids), store.matrix(node_ids))
        sims = (sims + sims.T) / 2.0  # kill float asymmetry from the matmul
        return cls.build(node_ids, sims)


def textrank(graph: SimilarityGraph, config: TextRankConfig = TextRankConfig()) -> dict[str, float]:
    """Stationary node scores; they always sum to one.

    Raises on non-convergence after max_iter, reporting the last delta.
    """
    n = len(graph.node_ids)
    if n == 0:
        raise StageError("textrank requires at least one node")
    if n == 1:
        return {graph.node_ids[0]: 1.0}
    weights = graph.weights
    out = weights.sum(axis=1)
    dangling = out == 0.0
    transition = np.zeros_like(weights)
    nonzero = ~dangling
    transition[nonzero] = weights[nonzero] / out[nonzero, None]

    rank = np.full(n, 1.0 / n)
    base = (1.0 - config.damping) / n
    for _ in range(config.max_iter):
        spread = float(rank[dangling].sum()) / n
        new_rank = base + config.damping * (transition.T @ rank + spread)
        delta = float(np.abs(new_rank - rank).sum())
        rank = new_rank
        if delta < config.tol:
            rank = rank / rank.sum()
            return dict(zip(graph.node_ids, rank.tolist()))
    raise StageError(f"textrank did not converge in {config.max_iter} iterations (last delta {delta:.3e})")


def order_cluster(
    members: Sequence[str], store: EmbeddingStore, config: TextRankConfig = TextRankConfig()
) -> list[tuple[str, float]]:
    """Cluster members with their scores, sorted by descending rank
    (ties by ascending argument id)."""
    if not members:
        raise StageError("cannot order an empty cluster")
    graph = SimilarityGraph.from_embeddings(members, store)
    scores = textrank(graph, config)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
