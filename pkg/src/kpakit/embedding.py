"""Dense argument embeddings: storage, similarity kernels, and acquisition.

Vectors are plain float64 numpy arrays. The store maps argument ids to
vectors of one shared dimension and is immutable once built. Kernels are
pure functions; cosine is the default everywhere, a raw dot-product kernel
is available behind a config flag.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .errors import BackendError, EmbeddingError

log = logging.getLogger(__name__)

Kernel = Callable[[np.ndarray, np.ndarray], float]


def _as_vector(values, context: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise EmbeddingError(f"{context}: vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(vec)):
        raise EmbeddingError(f"{context}: non-finite value in vector")
    return vec


def _unit(vec: np.ndarray, context: str = "vector") -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise EmbeddingError(f"{context}: zero-norm vector")
    return vec / norm


class EmbeddingStore:
    """Immutable id -> vector map with one shared dimension."""

    def __init__(self, vectors: Mapping[str, Iterable[float]]):
        if not vectors:
            raise EmbeddingError("embedding store cannot be empty")
        self._map: dict[str, np.ndarray] = {}
        dim: int | None = None
        for key, values in vectors.items():
            vec = _as_vector(values, f"id {key!r}")
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise EmbeddingError(
                    f"dimension mismatch: id {key!r} has dim {vec.size}, expected {dim}"
                )
            vec.setflags(write=False)
            self._map[key] = vec
        self.dim: int = int(dim)  # type: ignore[arg-type]

    def __getitem__(self, key: str) -> np.ndarray:
        try:
            return self._map[key]
        except KeyError:
            raise EmbeddingError(f"no embedding for id {key!r}") from None

    def __contains__(self, key: str) -> bool:
        return key in self._map

    def __len__(self) -> int:
        return len(self._map)

    @property
    def ids(self) -> list[str]:
        return list(self._map)

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Stack the vectors for ``ids`` into an (n, dim) array."""
        return np.stack([self[i] for i in ids]) if ids else np.empty((0, self.dim))

    def require(self, ids: Iterable[str]) -> None:
        missing = sorted(i for i in ids if i not in self._map)
        if missing:
            raise EmbeddingError(f"missing embeddings for ids: {missing}")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]. Zero-norm inputs are a hard error."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    value = float(np.dot(_unit(a), _unit(b)))
    return min(1.0, max(-1.0, value))


def dot_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Raw inner product, the alternative kernel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


KERNELS: dict[str, Kernel] = {"cosine": cosine, "dot": dot_similarity}


def centroid(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Component-wise mean of a non-empty, uniform-dim list of vectors."""
    if len(vectors) == 0:
        raise EmbeddingError("centroid of empty list")
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in vectors])
    return stacked.mean(axis=0)


def medoid(vectors: Sequence[np.ndarray]) -> int:
    """Index of the member maximizing summed cosine similarity to all others.

    Ties resolve to the lowest index.
    """
    if len(vectors) == 0:
        raise EmbeddingError("medoid of empty list")
    if len(vectors) == 1:
        return 0
    units = np.stack([_unit(np.asarray(v, dtype=np.float64), f"member {i}") for i, v in enumerate(vectors)])
    sims = units @ units.T
    totals = sims.sum(axis=1) - np.diag(sims)
    return int(np.argmax(totals))  # argmax returns the first (lowest) index on ties


def similarity_matrix(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix with entry (i, j) = cosine(a[i], b[j])."""
    ua = np.stack([_unit(np.asarray(v, dtype=np.float64), f"A[{i}]") for i, v in enumerate(a)])
    ub = np.stack([_unit(np.asarray(v, dtype=np.float64), f"B[{j}]") for j, v in enumerate(b)])
    if ua.shape[1] != ub.shape[1]:
        raise EmbeddingError(f"dimension mismatch: {ua.shape[1]} vs {ub.shape[1]}")
    return np.clip(ua @ ub.T, -1.0, 1.0)


def load_embedding_file(path: str | Path) -> EmbeddingStore:
    """Read a JSONL embedding file: one {"id": ..., "vector": [...]} per line."""
    path = Path(path)
    if not path.exists():
        raise EmbeddingError(f"embedding file does not exist: {path}")
    vectors: dict[str, list[float]] = {}
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if "id" not in row or "vector" not in row:
                raise EmbeddingError(f"{path}:{lineno}: expected keys 'id' and 'vector'")
            vectors[str(row["id"])] = row["vector"]
    if not vectors:
        raise EmbeddingError(f"{path}: empty embedding file")
    return EmbeddingStore(vectors)


def fetch_embeddings(endpoint: str, texts: Sequence[str], timeout: float = 60.0) -> list[list[float]]:
    """POST texts to a bridge /embed endpoint and return its vectors."""
    import requests

    url = endpoint.rstrip("/") + "/embed"
    try:
        response = requests.post(url, json={"texts": list(texts)}, timeout=timeout)
        response.raise_for_status()
    except requests.RequestException as exc:
        raise BackendError(f"bridge unreachable at {url}: {exc}") from exc
    body = response.json()
    vectors = body.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        raise BackendError(f"bridge returned {len(vectors or [])} vectors for {len(texts)} texts")
    return vectors


def attach_embeddings(corpus: Corpus, source: str | Path) -> EmbeddingStore:
    """Build the store for a corpus from a JSONL file or a bridge endpoint.

    ``source`` starting with http:// or https:// is treated as a bridge
    base URL; anything else as an embedding file path. Every argument id
    must end up with a vector.
    """
    if isinstance(source, str) and source.startswith(("http://", "https://")):
        ids = list(corpus.arguments)
        texts = [corpus.arguments[i].text for i in ids]
        vectors = fetch_embeddings(source, texts)
        store = EmbeddingStore(dict(zip(ids, vectors)))
    else:
        store = load_embedding_file(source)
    store.require(corpus.arguments)
    log.info("attached embeddings: %d vectors, dim %d", len(store), store.dim)
    return store
