import numpy as np
import pytest

from kpakit.corpus import Corpus, load_corpus
from kpakit.embedding import EmbeddingStore


@pytest.fixture
def tiny_corpus_csv(tmp_path):
    """Three arguments, one key point, two labels in a CSV directory."""
    root = tmp_path / "corpus"
    root.mkdir()
    (root / "arguments.csv").write_text(
        "arg_id,argument,topic,stance\n"
        "a1,Uniforms cost families money,School uniforms,pro\n"
        "a2,Uniforms erase personal style,School uniforms,pro\n"
        "a3,Uniforms level social differences,School uniforms,con\n",
        encoding="utf-8",
    )
    (root / "key_points.csv").write_text(
        "key_point_id,key_point,topic,stance\n"
        "k1,Uniforms are expensive,School uniforms,pro\n",
        encoding="utf-8",
    )
    (root / "labels.csv").write_text(
        "arg_id,key_point_id,label\n"
        "a1,k1,1\n"
        "a2,k1,0\n",
        encoding="utf-8",
    )
    return root


@pytest.fixture
def tiny_corpus(tiny_corpus_csv) -> Corpus:
    return load_corpus(tiny_corpus_csv)


def make_blobs(seed: int, sizes=(6, 6), dim: int = 2, spread: float = 0.05, factor: float = 12.0):
    """Two Gaussian blobs with center separation `factor` times the largest
    observed point-to-center radius. Returns (points, labels)."""
    rng = np.random.default_rng(seed)
    offsets = [rng.normal(scale=spread, size=(size, dim)) for size in sizes]
    radius = max(float(np.linalg.norm(o, axis=1).max()) for o in offsets)
    separation = factor * radius
    centers = [np.zeros(dim), np.r_[separation, np.zeros(dim - 1)]]
    points = np.vstack([off + c for off, c in zip(offsets, centers)])
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return points, labels


def store_from_points(points: np.ndarray, prefix: str = "a") -> EmbeddingStore:
    return EmbeddingStore({f"{prefix}{i:03d}": points[i] for i in range(len(points))})


class StubScorer:
    """Pair scorer backed by an explicit score table."""

    kind = "stub"
    symmetric = False

    def __init__(self, table: dict, default: float = 0.0, declared_range=(0.0, 1.0)):
        self.table = table
        self.default = default
        self.declared_range = declared_range

    def score(self, candidate: str, reference: str) -> float:
        return float(self.table.get((candidate, reference), self.default))
