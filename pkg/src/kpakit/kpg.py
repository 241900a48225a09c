"""Key point generation: prompt assembly, backend dispatch, duplicate
merging, and size ranking.

Each cluster yields one prompt of the form ``<stance word> <topic>
<arguments in centrality order>`` under a character budget; a generation
backend turns the prompt into a key point. Near-duplicate key points
(cosine at or above the merge threshold) collapse into connected
components whose representative keeps the largest effective size; ranking
is by effective size, then centrality, then id.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import Stance
from .embedding import EmbeddingStore, medoid, similarity_matrix
from .errors import BackendError, StageError

DEDUP_THRESHOLD = 0.95


@dataclass(frozen=True)
class Prompt:
    stance_word: str
    topic_text: str
    arg_ids: tuple[str, ...]
    arg_texts: tuple[str, ...]

    @property
    def rendered(self) -> str:
        return " ".join((self.stance_word, self.topic_text) + self.arg_texts)


@dataclass
class GeneratedKeyPoint:
    id: int
    text: str
    source_cluster_ids: set[int]
    effective_size: int
    centrality: float = 0.0
    rank: int = 0


@dataclass
class KeyPointSet:
    topic_id: str
    stance: Stance
    key_points: list[GeneratedKeyPoint] = field(default_factory=list)


def assemble_prompt(
    stance: Stance, topic_text: str, ordered_args: list[tuple[str, str]], budget: int = 2000
) -> Prompt:
    """Render ``<stance word> <topic> <args...>`` within ``budget`` characters.

    ``ordered_args`` are (arg_id, text) pairs in descending centrality;
    arguments are dropped from the tail until the prompt fits. At least
    one argument must survive.
    """
    if not ordered_args:
        raise StageError("cannot assemble a prompt from an empty cluster")
    kept = list(ordered_args)
    while kept:
        prompt = Prompt(
            stance_word=stance.word,
            topic_text=topic_text,
            arg_ids=tuple(a for a, _ in kept),
            arg_texts=tuple(t for _, t in kept),
        )
        if len(prompt.rendered) <= budget:
            return prompt
        kept.pop()
    raise StageError(f"budget exhausted: no argument fits within {budget} characters")


class ExtractiveBackend:
    """Model-free fallback: the key point is the prompt's medoid argument."""

    kind = "extractive"

    def __init__(self, store: EmbeddingStore):
        self._store = store

    def generate(self, prompt: Prompt) -> str:
        vectors = [self._store[a] for a in prompt.arg_ids]
        return prompt.arg_texts[medoid(vectors)]


class RemoteBackend:
    """Delegate generation to a model bridge ``/generate`` endpoint."""

    kind = "remote"

    def __init__(self, endpoint: str, max_new_tokens: int = 64, timeout: float = 120.0):
        self.endpoint = endpoint.rstrip("/")
        self.max_new_tokens = max_new_tokens
        self.timeout = timeout

    def generate(self, prompt: Prompt) -> str:
        import requests

        try:
            response = requests.post(
                self.endpoint + "/generate",
                json={"prompt": prompt.rendered, "max_new_tokens": self.max_new_tokens},
                timeout=self.timeout,
            )
            response.raise_for_status()
        except requests.RequestException as exc:
            raise BackendError(f"backend unreachable at {self.endpoint}: {exc}") from exc
        text = str(response.json().get("text", "")).strip()
        if not text:
            raise BackendError("backend returned an empty generation")
        return text


def generate(prompt: Prompt, backend) -> str:
    """Obtain one key point text for a prompt; empty output is an error."""
    text = backend.generate(prompt).strip()
    if not text:
        raise BackendError("empty generation")
    return text


def dedup_merge(
    kps: list[GeneratedKeyPoint],
    kp_embeddings: dict[int, np.ndarray],
    threshold: float = DEDUP_THRESHOLD,
) -> list[GeneratedKeyPoint]:
    """Merge connected components of key points with cosine >= threshold.

    The representative is the member with the largest effective size
    (ties: lowest id); merged sizes add and source clusters union.
    """
    if not kps:
        return []
    missing = [kp.id for kp in kps if kp.id not in kp_embeddings]
    if missing:
        raise StageError(f"missing embeddings for key points: {missing}")
    vectors = [np.asarray(kp_embeddings[kp.id], dtype=np.float64) for kp in kps]
    sims = similarity_matrix(vectors, vectors)

    parent = list(range(len(kps)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(len(kps)):
        for j in range(i + 1, len(kps)):
            if sims[i, j] >= threshold:
                parent[find(i)] = find(j)

    groups: dict[int, list[GeneratedKeyPoint]] = {}
    for i, kp in enumerate(kps):
        groups.setdefault(find(i), []).append(kp)

    merged = []
    for group in groups.values():
        rep = min(group, key=lambda kp: (-kp.effective_size, kp.id))
        merged.append(
            replace(
                rep,
                effective_size=sum(kp.effective_size for kp in group),
                source_cluster_ids=set().union(*(kp.source_cluster_ids for kp in group)),
            )
        )
    merged.sort(key=lambda kp: kp.id)
    return merged


def rank_and_truncate(
    kps: list[GeneratedKeyPoint], n: int, topic_id: str, stance: Stance
) -> KeyPointSet:
    """Sort by effective size desc, centrality desc, id asc; keep the top n."""
    if not kps:
        raise StageError("rank_and_truncate on an empty key point list")
    if n < 1:
        raise StageError("n must be at least 1")
    ranked = sorted(kps, key=lambda kp: (-kp.effective_size, -kp.centrality, kp.id))[:n]
    for position, kp in enumerate(ranked, start=1):
        kp.rank = position
    return KeyPointSet(topic_id=topic_id, stance=stance, key_points=ranked)
