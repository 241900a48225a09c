"""Dimensionality reduction of embeddings ahead of density clustering.

A pluggable stage: ``identity`` passes vectors through untouched, ``pca``
projects onto the top principal components of the centered data, found by
a deflated power iteration on the covariance matrix. The stage is
deterministic given its seed; an externally reduced embedding file can be
substituted via the same JSONL schema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingStore
from .errors import StageError

_POWER_TOL = 1e-10
_POWER_MAX_ITER = 1000


@dataclass(frozen=True)
class ReducerConfig:
    method: str = "pca"
    target_dim: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("identity", "pca"):
            raise StageError(f"unknown reducer method {self.method!r}")
        if self.target_dim < 1:
            raise StageError("target_dim must be positive")


def _null_completion(basis_done: list[np.ndarray], dim: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to every component found so far."""
    for axis in range(dim):
        cand = np.zeros(dim)
        cand[axis] = 1.0
        for prev in basis_done:
            cand -= (cand @ prev) * prev
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            return cand / norm
    raise StageError("could not complete orthonormal basis")


def _power_component(
    cov: np.ndarray, rng: np.random.Generator, basis_done: list[np.ndarray], scale: float
) -> tuple[np.ndarray, float]:
    """Leading eigenvector of ``cov`` by power iteration.

    A residual spectrum that is numerically zero (relative to the original
    covariance trace) falls back to a deterministic basis completion. On a
    near-degenerate spectrum the iterate at the cap is accepted; the cap
    exists to bound work, not to reject inputs.
    """
    dim = cov.shape[0]
    null_floor = 1e-12 * max(scale, 1e-300)
    if float(np.trace(cov)) <= null_floor:
        return _null_completion(basis_done, dim), 0.0

    vec = rng.normal(size=dim)
    vec /= np.linalg.norm(vec)
    for _ in range(_POWER_MAX_ITER):
        nxt = cov @ vec
        norm = np.linalg.norm(nxt)
        if norm <= null_floor:
            return _null_completion(basis_done, dim), 0.0
        nxt /= norm
        converged = min(np.linalg.norm(nxt - vec), np.linalg.norm(nxt + vec)) < _POWER_TOL
        vec = nxt
        if converged:
            break

    eigenvalue = float(vec @ cov @ vec)
    if eigenvalue <= null_floor:
        return _null_completion(basis_done, dim), 0.0
    # Fix the sign so the component is reproducible independent of the RNG draw.
    lead = np.argmax(np.abs(vec))
    if vec[lead] < 0:
        vec = -vec
    return vec, eigenvalue


def _pca_components(data: np.ndarray, target_dim: int, seed: int) -> np.ndarray:
    cov = (data.T @ data) / max(data.shape[0] - 1, 1)
    scale = float(np.trace(cov))
    rng = np.random.default_rng(seed)
    components: list[np.ndarray] = []
    for _ in range(target_dim):
        vec, eigenvalue = _power_component(cov, rng, components, scale)
        # Re-orthogonalize against earlier components to stop drift accumulating.
        for prev in components:
            vec -= (vec @ prev) * prev
        vec /= np.linalg.norm(vec)
        components.append(vec)
        cov = cov - eigenvalue * np.outer(vec, vec)
    return np.stack(components, axis=1)


def reduce(store: EmbeddingStore, config: ReducerConfig) -> EmbeddingStore:
    """Reduce every vector in the store to ``config.target_dim`` dimensions.

    The output store has the same id set. PCA output is centered, and
    identical (seed, input) pairs produce bit-identical results.
    """
    ids = sorted(store.ids)
    if config.method == "identity":
        if config.target_dim != store.dim:
            raise StageError(
                f"identity reducer requires target_dim == input dim ({store.dim}), got {config.target_dim}"
            )
        return store
    if config.target_dim > store.dim:
        raise StageError(f"target_dim {config.target_dim} exceeds input dim {store.dim}")
    if len(ids) < config.target_dim:
        raise StageError(f"pca needs at least target_dim={config.target_dim} points, got {len(ids)}")

    data = store.matrix(ids)
    centered = data - data.mean(axis=0)
    components = _pca_components(centered, config.target_dim, config.seed)
    projected = centered @ components
    return EmbeddingStore({i: projected[k] for k, i in enumerate(ids)})
