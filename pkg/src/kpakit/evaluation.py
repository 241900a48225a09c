"""Set-level evaluation: soft precision/recall/F1, optimal matching,
ROUGE over concatenations, and Spearman rank correlation.

Soft scores average, over one side's key points, the best pairwise
similarity found on the other side; a pair scorer is any object exposing
``score(candidate, reference)``, its declared output range, and whether
it is symmetric. Scorer outputs are never renormalized; soft scores
inherit the scorer's range.

ROUGE-1/2 are clipped n-gram overlap F-measures and ROUGE-L the
LCS-based F-measure. Tokenization is lowercase with splits on maximal
non-alphanumeric runs, no stemming or stopword removal.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .embedding import cosine
from .errors import BackendError, StageError

TOKENIZATION = "lowercase, split on maximal non-alphanumeric runs"
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class SoftScores:
    sP: float
    sR: float
    sF1: float


@dataclass(frozen=True)
class AssignmentResult:
    pairs: list[tuple[int, int]]
    total: float


@dataclass(frozen=True)
class RougeScores:
    r1: float
    r2: float
    rl: float


# ---------------------------------------------------------------------------
# Pair scorers


class HashingEmbedder:
    """Deterministic bag-of-tokens feature hashing, for model-free scoring."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            vec = np.zeros(self.dim)
            for token in _TOKEN_RE.findall(text.lower()):
                digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
                vec[int.from_bytes(digest, "big") % self.dim] += 1.0
            out.append(vec)
        return out


class CosineEmbeddingScorer:
    """f(candidate, reference) = cosine of the two text embeddings."""

    kind = "cosine_embedding"
    declared_range = (-1.0, 1.0)
    symmetric = True

    def __init__(self, embedder=None):
        self._embedder = embedder if embedder is not None else HashingEmbedder()

    def score(self, candidate: str, reference: str) -> float:
        a, b = self._embedder.embed([candidate, reference])
        return cosine(a, b)

    def score_matrix(self, candidates: Sequence[str], references: Sequence[str]) -> np.ndarray:
        texts = list(dict.fromkeys(list(candidates) + list(references)))
        vectors = dict(zip(texts, self._embedder.embed(texts)))
        matrix = np.empty((len(candidates), len(references)))
        for i, cand in enumerate(candidates):
            for j, ref in enumerate(references):
                matrix[i, j] = cosine(vectors[cand], vectors[ref])
        return matrix


class RemotePairScorer:
    """Delegate pair scoring to a bridge ``/score`` endpoint."""

    kind = "remote"
    symmetric = False

    def __init__(self, endpoint: str, metric: str = "token_overlap", timeout: float = 120.0):
        self.endpoint = endpoint.rstrip("/")
        self.metric = metric
        self.timeout = timeout
        self.declared_range: tuple[float, float] = (0.0, 1.0)

    def _post(self, pairs: list[dict]) -> list[float]:
        import requests

        try:
            response = requests.post(
                self.endpoint + "/score",
                json={"pairs": pairs, "metric": self.metric},
                timeout=self.timeout,
            )
            response.raise_for_status()
        except requests.RequestException as exc:
            raise BackendError(f"bridge unreachable at {self.endpoint}: {exc}") from exc
        body = response.json()
        scores = body.get("scores")
        if not isinstance(scores, list) or len(scores) != len(pairs):
            raise BackendError("bridge returned a malformed score batch")
        lo, hi = body.get("range", self.declared_range)
        self.declared_range = (float(lo), float(hi))
        bad = [s for s in scores if not (lo <= s <= hi)]
        if bad:
            raise BackendError(f"bridge scores outside declared range {self.declared_range}: {bad[:3]}")
        return [float(s) for s in scores]

    def score(self, candidate: str, reference: str) -> float:
        return self._post([{"candidate": candidate, "reference": reference}])[0]

    def score_matrix(self, candidates: Sequence[str], references: Sequence[str]) -> np.ndarray:
        pairs = [{"candidate": c, "reference": r} for c in candidates for r in references]
        scores = self._post(pairs)
        return np.asarray(scores).reshape(len(candidates), len(references))


def score_matrix(candidates: Sequence[str], references: Sequence[str], scorer) -> np.ndarray:
    """Matrix of f(candidate_i, reference_j), batched when the scorer supports it."""
    if hasattr(scorer, "score_matrix"):
        return np.asarray(scorer.score_matrix(candidates, references), dtype=np.float64)
    matrix = np.empty((len(candidates), len(references)))
    for i, cand in enumerate(candidates):
        for j, ref in enumerate(references):
            matrix[i, j] = scorer.score(cand, ref)
    return matrix


# ---------------------------------------------------------------------------
# Set-level metrics


def soft_scores(candidates: Sequence[str], references: Sequence[str], scorer) -> SoftScores:
    """Soft precision, recall, and F1 between two key point sets.

    sP averages each candidate's best score against the references; sR
    averages each reference's best score against the candidates; the
    scorer is always called as f(candidate, reference).
    """
    if not candidates or not references:
        raise StageError("soft_scores requires non-empty candidate and reference sets")
    matrix = score_matrix(candidates, references, scorer)
    # Summing the sorted maxima makes the result exactly invariant under
    # permutations of either set (float addition is order-sensitive).
    sp = float(np.sort(matrix.max(axis=1)).sum() / matrix.shape[0])
    sr = float(np.sort(matrix.max(axis=0)).sum() / matrix.shape[1])
    sf1 = 2.0 * sp * sr / (sp + sr) if sp + sr > 0 else 0.0
    return SoftScores(sP=sp, sR=sr, sF1=sf1)


def optimal_match(candidates: Sequence[str], references: Sequence[str], scorer) -> AssignmentResult:
    """Maximum-total perfect matching between equal-cardinality sets.

    Among equally optimal assignments the lexicographically smallest pair
    sequence is returned.
    """
    n = len(candidates)
    if n != len(references):
        raise StageError(f"optimal_match requires equal cardinalities, got {n} vs {len(references)}")
    if n == 0:
        raise StageError("optimal_match on empty sets")
    matrix = score_matrix(candidates, references, scorer)
    return assign_optimal(matrix)


def _lsa_total(matrix: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return float(matrix[rows, cols].sum())


def assign_optimal(matrix: np.ndarray) -> AssignmentResult:
    """Kuhn-Munkres maximization with lexicographic tie canonicalization."""
    matrix = np.asarray(matrix, dtype=np.float64)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise StageError(f"score matrix must be square, got {matrix.shape}")
    pairs: list[tuple[int, int]] = []
    available = list(range(n))
    for i in range(n):
        target = _lsa_total(matrix[np.ix_(range(i, n), available)])
        tol = 1e-9 * max(1.0, abs(target))
        for j in available:
            rest_cols = [c for c in available if c != j]
            rest = _lsa_total(matrix[np.ix_(range(i + 1, n), rest_cols)]) if rest_cols else 0.0
            if abs(matrix[i, j] + rest - target) <= tol:
                pairs.append((i, j))
                available.remove(j)
                break
        else:
            raise StageError("assignment canonicalization failed")  # numerically unreachable
    total = 0.0
    for i, j in pairs:
        total += float(matrix[i, j])
    return AssignmentResult(pairs=pairs, total=total)


# ---------------------------------------------------------------------------
# ROUGE


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _ngram_f(cand: list[str], ref: list[str], n: int) -> float:
    cand_counts = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
    ref_counts = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
    overlap = sum((cand_counts & ref_counts).values())
    total_cand = sum(cand_counts.values())
    total_ref = sum(ref_counts.values())
    precision = overlap / total_cand if total_cand else 0.0
    recall = overlap / total_ref if total_ref else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for token in a:
        cur = [0]
        for j, other in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if token == other else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate_text: str, reference_text: str) -> RougeScores:
    """F-measure ROUGE-1, ROUGE-2 and ROUGE-L for one text pair."""
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    if not cand or not ref:
        raise StageError("rouge input empty after tokenization")
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    rl = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return RougeScores(r1=_ngram_f(cand, ref, 1), r2=_ngram_f(cand, ref, 2), rl=rl)


def corpus_rouge(partition_pairs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> RougeScores:
    """Average ROUGE over partitions, each scored on the single-space
    concatenation of its candidates (rank order) and references (file order)."""
    if not partition_pairs:
        raise StageError("corpus_rouge requires at least one partition")
    per_partition = []
    for candidates, references in partition_pairs:
        if not references:
            raise StageError("partition missing references")
        if not candidates:
            raise StageError("partition missing candidates")
        per_partition.append(rouge(" ".join(candidates), " ".join(references)))
    return RougeScores(
        r1=float(np.mean([s.r1 for s in per_partition])),
        r2=float(np.mean([s.r2 for s in per_partition])),
        rl=float(np.mean([s.rl for s in per_partition])),
    )


# ---------------------------------------------------------------------------
# Rank correlation


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman correlation: Pearson correlation of average-rank vectors.

    Perfectly aligned or reversed rankings return exactly +1 or -1.
    """
    if len(x) != len(y):
        raise StageError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise StageError("spearman requires at least 3 observations")
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise StageError("spearman undefined for constant input")
    rx = rankdata(np.asarray(x, dtype=np.float64), method="average")
    ry = rankdata(np.asarray(y, dtype=np.float64), method="average")
    n = len(x)
    if np.array_equal(rx, ry):
        return 1.0
    if np.array_equal(rx, (n + 1) - ry):
        return -1.0
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))
