"""Iterative clustering of outliers.

Each unmatched argument is compared against every cluster anchor; it
joins the most similar cluster when that similarity clears the threshold
lambda, and founds a new singleton cluster otherwise. Newly founded
clusters enter the anchor pool immediately, and anchors are refreshed
after every membership change. Arguments are processed in descending
order of their best similarity to the initial anchors (ties broken by
argument id), so confident assignments shape the anchors before
ambiguous ones.

Anchors come in two modes: ``centroid`` scores a candidate against the
cluster's mean vector; ``mean_pairwise`` scores it as the average
similarity to every individual member. Similarity runs in the original
embedding space, not the reduced one, with cosine as the default kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingStore, cosine, dot_similarity
from .errors import EmbeddingError, StageError
from .kpm import ClusterSet


@dataclass(frozen=True)
class IcConfig:
    threshold: float = 0.9
    anchor_mode: str = "centroid"
    kernel: str = "cosine"

    def __post_init__(self):
        if self.anchor_mode not in ("centroid", "mean_pairwise"):
            raise StageError(f"unknown anchor mode {self.anchor_mode!r}")
        if self.kernel not in ("cosine", "dot"):
            raise StageError(f"unknown kernel {self.kernel!r}")


@dataclass
class Anchor:
    """A cluster's representative for similarity scoring."""

    cluster_id: int
    mode: str
    kernel: str
    vector_sum: np.ndarray  # raw member sum (centroid mode)
    unit_sum: np.ndarray    # sum of unit members (mean_pairwise cosine)
    count: int

    def score(self, candidate: np.ndarray) -> float:
        if self.mode == "centroid":
            center = self.vector_sum / self.count
            if self.kernel == "cosine":
                return cosine(candidate, center)
            return dot_similarity(candidate, center)
        if self.kernel == "cosine":
            norm = np.linalg.norm(candidate)
            if norm == 0.0:
                raise EmbeddingError("zero-norm candidate vector")
            return float((candidate / norm) @ self.unit_sum) / self.count
        return float(candidate @ self.vector_sum) / self.count

    def add(self, vector: np.ndarray) -> None:
        self.vector_sum = self.vector_sum + vector
        norm = np.linalg.norm(vector)
        if norm > 0:
            self.unit_sum = self.unit_sum + vector / norm
        self.count += 1

    @property
    def centroid_vector(self) -> np.ndarray:
        return self.vector_sum / self.count


def compute_anchor(
    members: list[str], store: EmbeddingStore, mode: str = "centroid", kernel: str = "cosine"
) -> Anchor:
    """Build the anchor for one cluster's members."""
    if not members:
        raise StageError("cannot anchor an empty cluster")
    vectors = store.matrix(members)
    norms = np.linalg.norm(vectors, axis=1)
    if mode == "centroid" and kernel == "cosine" and np.linalg.norm(vectors.mean(axis=0)) == 0.0:
        raise EmbeddingError("zero-norm centroid anchor")
    if np.any(norms == 0.0) and kernel == "cosine":
        raise EmbeddingError("zero-norm member vector")
    unit_sum = (vectors / np.where(norms[:, None] == 0.0, 1.0, norms[:, None])).sum(axis=0)
    return Anchor(
        cluster_id=-1,
        mode=mode,
        kernel=kernel,
        vector_sum=vectors.sum(axis=0),
        unit_sum=unit_sum,
        count=len(members),
    )


class _AnchorPool:
    """Anchor state for every cluster, laid out as arrays so each
    assignment step scores all anchors in one vectorized pass."""

    def __init__(self, mode: str, kernel: str, dim: int, capacity: int):
        self.mode = mode
        self.kernel = kernel
        self.vector_sum = np.zeros((capacity, dim))
        self.unit_sum = np.zeros((capacity, dim))
        self.counts = np.zeros(capacity)
        self.size = 0

    def append(self, vectors: np.ndarray) -> int:
        row = self.size
        self.vector_sum[row] = vectors.sum(axis=0)
        norms = np.linalg.norm(vectors, axis=1)
        if self.kernel == "cosine" and np.any(norms == 0.0):
            raise EmbeddingError("zero-norm member vector")
        self.unit_sum[row] = (vectors / np.where(norms[:, None] == 0.0, 1.0, norms[:, None])).sum(axis=0)
        self.counts[row] = vectors.shape[0]
        self.size += 1
        return row

    def add_member(self, row: int, vector: np.ndarray) -> None:
        self.vector_sum[row] += vector
        norm = np.linalg.norm(vector)
        if norm > 0:
            self.unit_sum[row] += vector / norm
        self.counts[row] += 1

    def scores(self, candidate: np.ndarray) -> np.ndarray:
        k = self.size
        counts = self.counts[:k]
        if self.mode == "centroid":
            centers = self.vector_sum[:k] / counts[:, None]
            if self.kernel == "dot":
                return centers @ candidate
            norms = np.linalg.norm(centers, axis=1)
            cnorm = np.linalg.norm(candidate)
            if cnorm == 0.0 or np.any(norms == 0.0):
                raise EmbeddingError("zero-norm vector in cosine scoring")
            return (centers @ candidate) / (norms * cnorm)
        if self.kernel == "dot":
            return (self.vector_sum[:k] @ candidate) / counts
        cnorm = np.linalg.norm(candidate)
        if cnorm == 0.0:
            raise EmbeddingError("zero-norm candidate vector")
        return (self.unit_sum[:k] @ (candidate / cnorm)) / counts


def iterative_assign(
    clusters: ClusterSet,
    unmatched: list[str],
    store: EmbeddingStore,
    config: IcConfig,
) -> ClusterSet:
    """Assign every unmatched argument to an existing or new cluster.

    Returns a new ClusterSet with zero outliers; original memberships are
    never removed, and the cluster count grows by at most len(unmatched).
    """
    clustered = {a for members in clusters.clusters.values() for a in members}
    overlap = clustered & set(unmatched)
    if overlap:
        raise StageError(f"arguments both clustered and unmatched: {sorted(overlap)}")
    store.require(unmatched)

    new_clusters = {cid: list(members) for cid, members in clusters.clusters.items()}
    cluster_ids = sorted(new_clusters)
    pool = _AnchorPool(config.anchor_mode, config.kernel, store.dim, len(cluster_ids) + len(unmatched))
    row_to_cid: list[int] = []
    for cid in cluster_ids:
        pool.append(store.matrix(new_clusters[cid]))
        row_to_cid.append(cid)

    # Freeze the processing order against the initial anchors.
    if pool.size:
        order_key = {a: -float(pool.scores(store[a]).max()) for a in unmatched}
    else:
        order_key = {a: 0.0 for a in unmatched}
    ordered = sorted(unmatched, key=lambda a: (order_key[a], a))

    next_id = max(new_clusters, default=-1) + 1
    for arg_id in ordered:
        vec = store[arg_id]
        best_row, best_score = -1, -np.inf
        if pool.size:
            scores = pool.scores(vec)
            best_row = int(np.argmax(scores))
            best_score = float(scores[best_row])
        if best_row >= 0 and best_score > config.threshold:
            new_clusters[row_to_cid[best_row]].append(arg_id)
            pool.add_member(best_row, vec)
        else:
            new_clusters[next_id] = [arg_id]
            pool.append(vec[None, :])
            row_to_cid.append(next_id)
            next_id += 1
    return ClusterSet(clusters=new_clusters, outliers=[])
