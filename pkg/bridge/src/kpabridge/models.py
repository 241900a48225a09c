"""Model backends for the bridge.

The stub set is model-free and fully deterministic: feature-hashed
bag-of-token embeddings, echo generation, and token-overlap pair scoring.
It exists so the protocol and its consumers can be exercised without
downloading any weights; real model wrappers implement the same three
methods and are chosen by deployment configuration.
"""

from __future__ import annotations

import hashlib
import re
import time
from collections import Counter

import numpy as np

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

SCORE_RANGE = (0.0, 1.0)


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


class StubModels:
    """Deterministic stand-ins for the three model roles."""

    def __init__(self, dim: int = 64, generate_delay: float = 0.0):
        self.dim = dim
        self.generate_delay = generate_delay

    @property
    def identifiers(self) -> dict[str, str]:
        return {
            "embedder": f"stub-hash-{self.dim}",
            "generator": "stub-echo",
            "scorer": "stub-token-overlap",
        }

    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            vec = np.zeros(self.dim)
            tokens = _tokens(text)
            for token in tokens:
                vec[_bucket(token, self.dim)] += 1.0
            if not tokens:
                # Keep the vector non-zero so cosine consumers never see a
                # degenerate embedding.
                vec[_bucket(text or "\x00", self.dim)] = 1.0
            vec /= np.linalg.norm(vec)
            vectors.append([float(v) for v in vec])
        return vectors

    def generate(self, prompt: str, max_new_tokens: int, seed: int | None = None) -> str:
        if self.generate_delay:
            time.sleep(self.generate_delay)
        words = prompt.split()
        return " ".join(words[: max(1, max_new_tokens)])

    def score(self, pairs: list[tuple[str, str]], metric: str) -> list[float]:
        if metric == "exact":
            return [1.0 if c == r else 0.0 for c, r in pairs]
        if metric != "token_overlap":
            raise ValueError(f"unknown metric {metric!r}")
        scores = []
        for candidate, reference in pairs:
            cand = Counter(_tokens(candidate))
            ref = Counter(_tokens(reference))
            overlap = sum((cand & ref).values())
            total_c, total_r = sum(cand.values()), sum(ref.values())
            if overlap == 0 or not total_c or not total_r:
                scores.append(0.0)
                continue
            precision = overlap / total_c
            recall = overlap / total_r
            scores.append(2 * precision * recall / (precision + recall))
        return scores
