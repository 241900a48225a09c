"""On-disk pipeline artifacts.

Every artifact JSONL file opens with a manifest line carrying the hash of
the configuration slice that produced it, so stage outputs are
self-describing and reruns are byte-comparable. Readers skip the manifest
line; writers emit rows with sorted keys so identical runs produce
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Stance
from .errors import InputError
from .kpg import KeyPointSet
from .kpm import ClusterSet

SCHEMA_VERSION = 1


def config_hash(config_slice: dict) -> str:
    payload = json.dumps(config_slice, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def _dump(row: dict) -> str:
    return json.dumps(row, sort_keys=True) + "\n"


def write_jsonl(path: str | Path, rows: list[dict], manifest: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        handle.write(_dump({"manifest": {"schema_version": SCHEMA_VERSION, **manifest}}))
        for row in rows:
            handle.write(_dump(row))


def read_jsonl(path: str | Path) -> tuple[dict, list[dict]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"artifact file does not exist: {path}")
    manifest: dict = {}
    rows: list[dict] = []
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if lineno == 1 and "manifest" in row:
                manifest = row["manifest"]
            else:
                rows.append(row)
    return manifest, rows


# ---------------------------------------------------------------------------
# Cluster artifacts


@dataclass
class PartitionClusters:
    """One partition's clustering result, plus discretized extras."""

    topic_id: str
    stance: Stance
    clusters: ClusterSet
    secondary: dict[int, list[str]] = field(default_factory=dict)
    gamma: float = 0.0

    @property
    def key(self) -> tuple[str, str]:
        return (self.topic_id, self.stance.value)

    def combined_members(self, cluster_id: int) -> list[str]:
        return list(self.clusters.clusters[cluster_id]) + list(self.secondary.get(cluster_id, []))


def cluster_rows(partitions: list[PartitionClusters]) -> list[dict]:
    rows = []
    for part in partitions:
        for cid in sorted(part.clusters.clusters):
            rows.append(
                {
                    "cluster_id": cid,
                    "topic": part.topic_id,
                    "stance": part.stance.value,
                    "members": list(part.clusters.clusters[cid]),
                    "secondary_members": list(part.secondary.get(cid, [])),
                }
            )
        rows.append(
            {
                "cluster_id": -1,
                "topic": part.topic_id,
                "stance": part.stance.value,
                "members": list(part.clusters.outliers),
            }
        )
    return rows


def write_clusters(path: str | Path, partitions: list[PartitionClusters], manifest: dict) -> None:
    write_jsonl(path, cluster_rows(partitions), manifest)


def read_clusters(path: str | Path) -> tuple[dict, list[PartitionClusters]]:
    manifest, rows = read_jsonl(path)
    by_key: dict[tuple[str, str], PartitionClusters] = {}
    for row in rows:
        key = (row["topic"], row["stance"])
        part = by_key.get(key)
        if part is None:
            part = PartitionClusters(
                topic_id=row["topic"],
                stance=Stance.parse(row["stance"]),
                clusters=ClusterSet(clusters={}, outliers=[]),
            )
            by_key[key] = part
        if row["cluster_id"] == -1:
            part.clusters.outliers = list(row["members"])
        else:
            part.clusters.clusters[row["cluster_id"]] = list(row["members"])
            secondary = row.get("secondary_members", [])
            if secondary:
                part.secondary[row["cluster_id"]] = list(secondary)
    return manifest, [by_key[k] for k in sorted(by_key)]


# ---------------------------------------------------------------------------
# Key point artifacts


def keypoint_rows(kp_sets: list[KeyPointSet]) -> list[dict]:
    rows = []
    kp_id = 0
    for kp_set in kp_sets:
        for kp in kp_set.key_points:
            rows.append(
                {
                    "kp_id": kp_id,
                    "topic": kp_set.topic_id,
                    "stance": kp_set.stance.value,
                    "text": kp.text,
                    "rank": kp.rank,
                    "effective_size": kp.effective_size,
                    "source_clusters": sorted(kp.source_cluster_ids),
                }
            )
            kp_id += 1
    return rows


def write_keypoints(path: str | Path, kp_sets: list[KeyPointSet], manifest: dict) -> None:
    write_jsonl(path, keypoint_rows(kp_sets), manifest)


def read_keypoints(path: str | Path) -> tuple[dict, dict[tuple[str, str], list[dict]]]:
    """Key point rows grouped by (topic, stance), sorted by rank."""
    manifest, rows = read_jsonl(path)
    grouped: dict[tuple[str, str], list[dict]] = {}
    for row in rows:
        grouped.setdefault((row["topic"], row["stance"]), []).append(row)
    for group in grouped.values():
        group.sort(key=lambda r: r["rank"])
    return manifest, grouped


def write_json(path: str | Path, document: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
