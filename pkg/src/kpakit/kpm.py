"""Density-based key point modelling: cluster reduced embeddings and
derive per-argument cluster membership probabilities.

The density clusterer is a self-contained HDBSCAN realization: mutual
reachability distances (min_samples equal to min_cluster_size), a Prim
minimum spanning tree, a condensed cluster tree, and excess-of-mass flat
extraction. Two departures from the usual library behaviour are
deliberate:

* the dendrogram root competes in the excess-of-mass selection, with its
  birth set at its first structural event, so degenerate single-cluster
  data yields one cluster instead of all noise;
* a point directly attached to a selected cluster is a member only if it
  persisted strictly past the cluster's birth; when no attached point
  does (zero density range), all of them are kept.

K-Means (seeded farthest-point init) is included as an alternative
strategy that never emits outliers.

Membership probabilities are a softmax of negative Euclidean distances to
cluster centroids in the reduced space, with temperature tau. The
discretization threshold gamma is the mean over arguments of the
second-highest membership probability; each argument is then assigned to
its argmax cluster plus every other cluster reaching gamma.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Partition
from .embedding import EmbeddingStore
from .errors import StageError


@dataclass(frozen=True)
class KpmConfig:
    method: str = "hdbscan"
    min_cluster_size: int = 3
    k: int = 5
    tau: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("hdbscan", "kmeans"):
            raise StageError(f"unknown clustering method {self.method!r}")
        if self.method == "hdbscan" and self.min_cluster_size < 2:
            raise StageError("min_cluster_size must be at least 2")
        if self.method == "kmeans" and self.k < 1:
            raise StageError("k must be at least 1")
        if self.tau <= 0:
            raise StageError("tau must be positive")


@dataclass
class ClusterSet:
    """Cluster id -> ordered member arg ids, plus the outlier list."""

    clusters: dict[int, list[str]]
    outliers: list[str] = field(default_factory=list)

    def __post_init__(self):
        clustered: set[str] = set()
        for cid, members in self.clusters.items():
            if not members:
                raise StageError(f"cluster {cid} is empty")
            clustered.update(members)
        overlap = clustered & set(self.outliers)
        if overlap:
            raise StageError(f"arguments both clustered and outlier: {sorted(overlap)}")

    @property
    def count(self) -> int:
        return len(self.clusters)

    def all_arg_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for members in self.clusters.values():
            for arg_id in members:
                seen.setdefault(arg_id)
        for arg_id in self.outliers:
            seen.setdefault(arg_id)
        return list(seen)


@dataclass(frozen=True)
class MembershipVector:
    arg_id: str
    probs: dict[int, float]

    def second_max(self) -> float:
        if len(self.probs) < 2:
            return 0.0
        return sorted(self.probs.values(), reverse=True)[1]


# ---------------------------------------------------------------------------
# HDBSCAN


def _mutual_reachability(points: np.ndarray, min_samples: int) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    # Core distance: distance to the min_samples-th nearest neighbour,
    # counting the point itself.
    core = np.sort(dist, axis=1)[:, min_samples - 1]
    mreach = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mreach, 0.0)
    return mreach


def _prim_mst(weights: np.ndarray) -> list[tuple[int, int, float]]:
    n = weights.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_from = np.zeros(n, dtype=np.int64)
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        candidates = np.where(~in_tree, best, np.inf)
        nxt = int(np.argmin(candidates))
        edges.append((int(best_from[nxt]), nxt, float(best[nxt])))
        in_tree[nxt] = True
        closer = weights[nxt] < best
        update = closer & ~in_tree
        best[update] = weights[nxt][update]
        best_from[update] = nxt
    return edges


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def _single_linkage(edges: list[tuple[int, int, float]], n: int) -> list[tuple[int, int, float]]:
    """Merge dendrogram from MST edges: node n+t joins two components at step t."""
    edges = sorted(edges, key=lambda e: e[2])
    uf = _UnionFind(2 * n - 1)
    top = list(range(n)) + [-1] * (n - 1)  # component root -> current dendrogram node
    nodes: list[tuple[int, int, float]] = []
    for t, (u, v, dist) in enumerate(edges):
        ru, rv = uf.find(u), uf.find(v)
        nodes.append((top[ru], top[rv], dist))
        new = n + t
        uf.union(ru, new)
        uf.union(rv, new)
        top[uf.find(new)] = new
    return nodes


@dataclass
class _CondensedCluster:
    birth: float
    parent: int | None
    points: list[tuple[int, float]] = field(default_factory=list)
    children: list[int] = field(default_factory=list)
    subtree_size: int = 0


def _lambda(dist: float) -> float:
    return np.inf if dist == 0.0 else 1.0 / dist


def _condense(nodes: list[tuple[int, int, float]], n: int, min_cluster_size: int) -> list[_CondensedCluster]:
    """Walk the dendrogram top-down, keeping only splits into two
    components of at least min_cluster_size points."""

    def size(node: int) -> int:
        return 1 if node < n else sizes[node - n]

    sizes = [0] * len(nodes)
    for t, (left, right, _) in enumerate(nodes):
        sizes[t] = size(left) + size(right)

    def leaves(node: int) -> list[int]:
        out, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                left, right, _ = nodes[cur - n]
                stack.extend((left, right))
        return out

    root_node = n + len(nodes) - 1
    root_birth = _lambda(nodes[-1][2])  # first structural event of the whole tree
    clusters = [_CondensedCluster(birth=root_birth, parent=None)]
    stack: list[tuple[int, int]] = [(0, root_node)]  # (cluster id, dendrogram node)
    while stack:
        cid, node = stack.pop()
        while True:
            if node < n:
                clusters[cid].points.append((node, clusters[cid].birth))
                break
            left, right, dist = nodes[node - n]
            lam = _lambda(dist)
            big_left = size(left) >= min_cluster_size
            big_right = size(right) >= min_cluster_size
            if big_left and big_right:
                for child_node in (left, right):
                    clusters.append(_CondensedCluster(birth=lam, parent=cid))
                    clusters[cid].children.append(len(clusters) - 1)
                    stack.append((len(clusters) - 1, child_node))
                break
            if not big_left and not big_right:
                for idx in leaves(node):
                    clusters[cid].points.append((idx, lam))
                break
            keep, shed = (left, right) if big_left else (right, left)
            for idx in leaves(shed):
                clusters[cid].points.append((idx, lam))
            node = keep

    for cluster in clusters:
        cluster.subtree_size = len(cluster.points)
    for cid in range(len(clusters) - 1, 0, -1):
        parent = clusters[cid].parent
        clusters[parent].subtree_size += clusters[cid].subtree_size  # type: ignore[index]
    return clusters


def _stability(cluster: _CondensedCluster, clusters: list[_CondensedCluster]) -> float:
    total = 0.0
    for _, lam in cluster.points:
        if lam > cluster.birth:
            total += lam - cluster.birth  # inf birth contributes nothing
    for child_id in cluster.children:
        child = clusters[child_id]
        if child.birth > cluster.birth:
            total += child.subtree_size * (child.birth - cluster.birth)
    return total


def _extract_labels(clusters: list[_CondensedCluster], n: int) -> np.ndarray:
    sigma = [_stability(c, clusters) for c in clusters]
    value = [0.0] * len(clusters)
    selected = [False] * len(clusters)
    for cid in range(len(clusters) - 1, -1, -1):
        child_sum = sum(value[d] for d in clusters[cid].children)
        if clusters[cid].children and child_sum > sigma[cid]:
            value[cid] = child_sum
        else:
            value[cid] = sigma[cid]
            selected[cid] = True
            stack = list(clusters[cid].children)
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(clusters[d].children)

    labels = np.full(n, -1, dtype=np.int64)
    chosen = [cid for cid, sel in enumerate(selected) if sel]
    for label, cid in enumerate(chosen):
        cluster = clusters[cid]
        direct = [idx for idx, lam in cluster.points if lam > cluster.birth]
        if not direct:  # zero density range: nothing distinguishable, keep all
            direct = [idx for idx, _ in cluster.points]
        for idx in direct:
            labels[idx] = label
        stack = list(cluster.children)
        while stack:
            d = stack.pop()
            for idx, _ in clusters[d].points:
                labels[idx] = label
            stack.extend(clusters[d].children)
    return labels


def _hdbscan_labels(points: np.ndarray, min_cluster_size: int) -> np.ndarray:
    n = points.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    mreach = _mutual_reachability(points, min_cluster_size)
    mst = _prim_mst(mreach)
    nodes = _single_linkage(mst, n)
    condensed = _condense(nodes, n, min_cluster_size)
    return _extract_labels(condensed, n)


# ---------------------------------------------------------------------------
# K-Means


def _kmeans_labels(points: np.ndarray, k: int, seed: int, max_iter: int = 100) -> np.ndarray:
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    dist_to_nearest = np.linalg.norm(points - centers[0], axis=1)
    for j in range(1, k):
        centers[j] = points[int(np.argmax(dist_to_nearest))]  # farthest-point init
        dist_to_nearest = np.minimum(dist_to_nearest, np.linalg.norm(points - centers[j], axis=1))

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        new_labels = np.argmin(dists, axis=1)
        own_dist = dists[np.arange(n), new_labels].copy()
        for j in range(k):
            if not np.any(new_labels == j):
                # Re-seed an emptied cluster with the point farthest from its center.
                worst = int(np.argmax(own_dist))
                new_labels[worst] = j
                own_dist[worst] = -np.inf
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
    return labels


# ---------------------------------------------------------------------------
# Public operations


def cluster(reduced: EmbeddingStore, partition: Partition, config: KpmConfig) -> ClusterSet:
    """Cluster one partition's reduced vectors into a ClusterSet.

    HDBSCAN may leave outliers; K-Means never does. Deterministic given
    the config seed.
    """
    arg_ids = list(partition.arg_ids)
    reduced.require(arg_ids)
    points = reduced.matrix(arg_ids)
    if config.method == "hdbscan":
        if len(arg_ids) < config.min_cluster_size:
            raise StageError(
                f"partition {partition.key} has {len(arg_ids)} arguments, "
                f"fewer than min_cluster_size {config.min_cluster_size}"
            )
        raw = _hdbscan_labels(points, config.min_cluster_size)
    else:
        if config.k > len(arg_ids):
            raise StageError(f"k={config.k} exceeds partition size {len(arg_ids)}")
        raw = _kmeans_labels(points, config.k, config.seed)

    # Renumber cluster ids by first appearance in partition order.
    remap: dict[int, int] = {}
    clusters: dict[int, list[str]] = {}
    outliers: list[str] = []
    for arg_id, label in zip(arg_ids, raw.tolist()):
        if label == -1:
            outliers.append(arg_id)
            continue
        cid = remap.setdefault(label, len(remap))
        clusters.setdefault(cid, []).append(arg_id)
    return ClusterSet(clusters=clusters, outliers=outliers)


def membership(reduced: EmbeddingStore, clusters: ClusterSet, tau: float = 1.0) -> list[MembershipVector]:
    """Per-argument probability over clusters: softmax(-distance/tau) to centroids."""
    if clusters.count < 1:
        raise StageError("membership requires at least one cluster")
    cids = sorted(clusters.clusters)
    centroids = np.stack([reduced.matrix(clusters.clusters[c]).mean(axis=0) for c in cids])
    vectors = []
    for arg_id in clusters.all_arg_ids():
        dists = np.linalg.norm(centroids - reduced[arg_id], axis=1)
        logits = -(dists - dists.min()) / tau
        weights = np.exp(logits)
        probs = weights / weights.sum()
        vectors.append(MembershipVector(arg_id=arg_id, probs=dict(zip(cids, probs.tolist()))))
    return vectors


def compute_gamma(vectors: list[MembershipVector]) -> float:
    """Mean over arguments of the second-highest cluster probability.

    Zero when there is a single cluster (no second probability exists).
    """
    if not vectors:
        raise StageError("compute_gamma on empty membership list")
    return float(np.mean([v.second_max() for v in vectors]))


def discretize(
    vectors: list[MembershipVector], gamma: float, clusters: ClusterSet
) -> dict[str, set[int]]:
    """Assign each argument its argmax cluster plus all clusters with
    probability at least gamma (secondary assignments only when gamma > 0).

    Outliers map to the empty set.
    """
    by_id = {v.arg_id: v for v in vectors}
    outlier_ids = set(clusters.outliers)
    assignment: dict[str, set[int]] = {}
    for arg_id in clusters.all_arg_ids():
        if arg_id in outlier_ids:
            assignment[arg_id] = set()
            continue
        vec = by_id.get(arg_id)
        if vec is None:
            raise StageError(f"no membership vector for argument {arg_id!r}")
        best_p = max(vec.probs.values())
        best = min(cid for cid, p in vec.probs.items() if p == best_p)
        chosen = {best}
        if gamma > 0:
            chosen.update(cid for cid, p in vec.probs.items() if p >= gamma)
        assignment[arg_id] = chosen
    return assignment
