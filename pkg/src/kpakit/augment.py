"""Quality filtering of augmented (paraphrase) argument pairs.

Each pair is scored f(generated, original) with a pair scorer; the
lowest-scoring floor(drop_fraction * n) pairs are removed. Ties at the
cut drop the higher id. The cut is global by default; per-topic grouping
is available when pairs carry a topic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError, StageError


@dataclass
class AugmentedPair:
    id: str
    original: str
    generated: str
    score: float = 0.0
    topic: str = ""

    def __post_init__(self):
        if not self.original.strip() or not self.generated.strip():
            raise InputError(f"pair {self.id!r}: empty text")


def quality_filter(pairs: list[AugmentedPair], scorer, drop_fraction: float = 0.25) -> list[AugmentedPair]:
    """Return the pairs surviving the cut, in their original order."""
    if not pairs:
        raise StageError("quality_filter on an empty pair list")
    if not 0.0 <= drop_fraction < 1.0:
        raise StageError("drop_fraction must lie in [0, 1)")
    for pair in pairs:
        pair.score = float(scorer.score(pair.generated, pair.original))
    n_drop = int(drop_fraction * len(pairs))
    if n_drop == 0:
        return list(pairs)
    # Lowest score first; among equal scores the higher id drops first
    # (stable sort on score preserves the id-descending pre-order).
    by_id_desc = sorted(pairs, key=lambda p: p.id, reverse=True)
    doomed_ids = {p.id for p in sorted(by_id_desc, key=lambda p: p.score)[:n_drop]}
    return [p for p in pairs if p.id not in doomed_ids]


def quality_filter_per_topic(
    pairs: list[AugmentedPair], scorer, drop_fraction: float = 0.25
) -> list[AugmentedPair]:
    """Apply the cut independently inside each topic group."""
    groups: dict[str, list[AugmentedPair]] = {}
    for pair in pairs:
        groups.setdefault(pair.topic, []).append(pair)
    kept_ids: set[str] = set()
    for group in groups.values():
        kept_ids.update(p.id for p in quality_filter(group, scorer, drop_fraction))
    return [p for p in pairs if p.id in kept_ids]


def load_pairs(path: str | Path) -> list[AugmentedPair]:
    """Read {"id", "original", "generated"[, "topic"]} JSONL rows."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"pairs file does not exist: {path}")
    pairs = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                pairs.append(
                    AugmentedPair(
                        id=str(row["id"]),
                        original=str(row["original"]),
                        generated=str(row["generated"]),
                        topic=str(row.get("topic", "")),
                    )
                )
            except KeyError as exc:
                raise InputError(f"{path}:{lineno}: missing key {exc}") from exc
    if not pairs:
        raise InputError(f"{path}: no pairs found")
    return pairs


def dump_pairs(pairs: list[AugmentedPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for pair in pairs:
            row = {"id": pair.id, "original": pair.original, "generated": pair.generated, "score": pair.score}
            if pair.topic:
                row["topic"] = pair.topic
            handle.write(json.dumps(row, sort_keys=True) + "\n")
