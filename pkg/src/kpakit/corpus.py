"""Argument corpus loading, validation, and partitioning.

A corpus is a set of stance-tagged arguments over debate topics, plus
optional expert-written reference key points and binary argument-to-key-point
match labels.

Two on-disk layouts are supported:

CSV: a directory containing ``arguments.csv`` (columns
``arg_id,argument,topic,stance``), and optionally ``key_points.csv``
(``key_point_id,key_point,topic,stance``) and ``labels.csv``
(``arg_id,key_point_id,label``). A single ``.csv`` file is treated as an
arguments-only corpus.

JSONL: a single file, one object per line; the row kind is inferred from
its keys (the same field names as the CSV columns).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import CorpusError

log = logging.getLogger(__name__)

# Tokens accepted (case-insensitively) for each stance.
_STANCE_ALIASES = {
    "pro": "pro", "positive": "pro", "1": "pro",
    "con": "con", "negative": "con", "-1": "con",
}


class Stance(str, Enum):
    PRO = "pro"
    CON = "con"

    @classmethod
    def parse(cls, token: str) -> "Stance":
        normalized = _STANCE_ALIASES.get(str(token).strip().lower())
        if normalized is None:
            raise CorpusError(f"unknown stance {token!r}")
        return cls(normalized)

    @property
    def word(self) -> str:
        """Rendering used in generation prompts."""
        return "Positive" if self is Stance.PRO else "Negative"


@dataclass(frozen=True)
class Topic:
    id: str
    text: str


@dataclass(frozen=True)
class Argument:
    id: str
    text: str
    topic_id: str
    stance: Stance


@dataclass(frozen=True)
class ReferenceKeyPoint:
    id: str
    text: str
    topic_id: str
    stance: Stance


@dataclass(frozen=True)
class MatchLabel:
    arg_id: str
    kp_id: str
    label: int


@dataclass(frozen=True)
class Partition:
    """All arguments sharing one (topic, stance) pair, in corpus order."""

    topic_id: str
    stance: Stance
    arg_ids: tuple[str, ...]

    @property
    def key(self) -> tuple[str, str]:
        return (self.topic_id, self.stance.value)


@dataclass
class Corpus:
    topics: dict[str, Topic] = field(default_factory=dict)
    arguments: dict[str, Argument] = field(default_factory=dict)
    reference_kps: dict[str, ReferenceKeyPoint] = field(default_factory=dict)
    labels: list[MatchLabel] = field(default_factory=list)

    def counts(self) -> tuple[int, int, int]:
        return (len(self.arguments), len(self.reference_kps), len(self.labels))

    def validate(self) -> None:
        seen_pairs: set[tuple[str, str]] = set()
        for lab in self.labels:
            arg = self.arguments.get(lab.arg_id)
            if arg is None:
                raise CorpusError(f"dangling reference: label points at unknown arg_id {lab.arg_id!r}")
            kp = self.reference_kps.get(lab.kp_id)
            if kp is None:
                raise CorpusError(f"dangling reference: label points at unknown key_point_id {lab.kp_id!r}")
            if (arg.topic_id, arg.stance) != (kp.topic_id, kp.stance):
                raise CorpusError(
                    f"label ({lab.arg_id!r}, {lab.kp_id!r}) crosses topic/stance boundaries"
                )
            pair = (lab.arg_id, lab.kp_id)
            if pair in seen_pairs:
                raise CorpusError(f"duplicate label for pair {pair!r}")
            seen_pairs.add(pair)
        for arg in self.arguments.values():
            if arg.topic_id not in self.topics:
                raise CorpusError(f"argument {arg.id!r} references unknown topic {arg.topic_id!r}")
        for kp in self.reference_kps.values():
            if kp.topic_id not in self.topics:
                raise CorpusError(f"key point {kp.id!r} references unknown topic {kp.topic_id!r}")


def _clean_text(value: str, what: str, where: str) -> str:
    text = str(value).strip()
    if not text:
        raise CorpusError(f"{where}: empty {what} text")
    return text


def _intern_topic(corpus: Corpus, topic_text: str, where: str) -> str:
    text = _clean_text(topic_text, "topic", where)
    if text not in corpus.topics:
        corpus.topics[text] = Topic(id=text, text=text)
    return text


def _add_argument(corpus: Corpus, row: dict, where: str) -> None:
    arg_id = str(row["arg_id"]).strip()
    if not arg_id:
        raise CorpusError(f"{where}: empty arg_id")
    if arg_id in corpus.arguments:
        raise CorpusError(f"{where}: duplicate arg_id {arg_id!r}")
    topic_id = _intern_topic(corpus, row["topic"], where)
    corpus.arguments[arg_id] = Argument(
        id=arg_id,
        text=_clean_text(row["argument"], "argument", where),
        topic_id=topic_id,
        stance=Stance.parse(row["stance"]),
    )


def _add_key_point(corpus: Corpus, row: dict, where: str) -> None:
    kp_id = str(row["key_point_id"]).strip()
    if not kp_id:
        raise CorpusError(f"{where}: empty key_point_id")
    if kp_id in corpus.reference_kps:
        raise CorpusError(f"{where}: duplicate key_point_id {kp_id!r}")
    topic_id = _intern_topic(corpus, row["topic"], where)
    corpus.reference_kps[kp_id] = ReferenceKeyPoint(
        id=kp_id,
        text=_clean_text(row["key_point"], "key point", where),
        topic_id=topic_id,
        stance=Stance.parse(row["stance"]),
    )


def _add_label(corpus: Corpus, row: dict, where: str) -> None:
    raw = str(row["label"]).strip()
    if raw not in {"0", "1"}:
        raise CorpusError(f"{where}: label must be 0 or 1, got {raw!r}")
    corpus.labels.append(
        MatchLabel(arg_id=str(row["arg_id"]).strip(), kp_id=str(row["key_point_id"]).strip(), label=int(raw))
    )


_ARG_COLUMNS = {"arg_id", "argument", "topic", "stance"}
_KP_COLUMNS = {"key_point_id", "key_point", "topic", "stance"}
_LABEL_COLUMNS = {"arg_id", "key_point_id", "label"}


def _read_csv_rows(path: Path, required: set[str]) -> list[tuple[int, dict]]:
    with path.open(encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise CorpusError(f"{path}: empty file")
        missing = required - set(reader.fieldnames)
        if missing:
            raise CorpusError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if any(v is None for v in row.values()):
                raise CorpusError(f"{path}:{lineno}: malformed row (wrong field count)")
            rows.append((lineno, row))
    return rows


def _load_csv(path: Path) -> Corpus:
    if path.is_dir():
        args_path = path / "arguments.csv"
        kps_path = path / "key_points.csv"
        labels_path = path / "labels.csv"
        if not args_path.exists():
            raise CorpusError(f"{path}: no arguments.csv in corpus directory")
    else:
        args_path, kps_path, labels_path = path, None, None

    corpus = Corpus()
    for lineno, row in _read_csv_rows(args_path, _ARG_COLUMNS):
        _add_argument(corpus, row, f"{args_path}:{lineno}")
    if kps_path is not None and kps_path.exists():
        for lineno, row in _read_csv_rows(kps_path, _KP_COLUMNS):
            _add_key_point(corpus, row, f"{kps_path}:{lineno}")
    if labels_path is not None and labels_path.exists():
        for lineno, row in _read_csv_rows(labels_path, _LABEL_COLUMNS):
            _add_label(corpus, row, f"{labels_path}:{lineno}")
    return corpus


def _load_jsonl(path: Path) -> Corpus:
    corpus = Corpus()
    pending_labels: list[tuple[str, dict]] = []
    n_rows = 0
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            n_rows += 1
            where = f"{path}:{lineno}"
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: malformed JSON ({exc.msg})") from exc
            keys = set(row)
            if _LABEL_COLUMNS <= keys:
                pending_labels.append((where, row))
            elif _ARG_COLUMNS <= keys:
                _add_argument(corpus, row, where)
            elif _KP_COLUMNS <= keys:
                _add_key_point(corpus, row, where)
            else:
                raise CorpusError(f"{where}: unrecognized row keys {sorted(keys)}")
    if n_rows == 0:
        raise CorpusError(f"{path}: empty file")
    # Labels may precede the rows they reference; add them last.
    for where, row in pending_labels:
        _add_label(corpus, row, where)
    return corpus


def load_corpus(path: str | Path, format: str | None = None) -> Corpus:
    """Load and validate a corpus from ``path``.

    ``format`` is ``"csv"`` or ``"jsonl"``; when omitted it is inferred
    from the path (directories and ``.csv`` files are CSV, anything else
    JSONL). Raises :class:`CorpusError` on malformed rows, unknown stance
    tokens, dangling label references, or an empty file.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus path does not exist: {path}")
    if format is None:
        format = "csv" if (path.is_dir() or path.suffix.lower() == ".csv") else "jsonl"
    if format == "csv":
        corpus = _load_csv(path)
    elif format == "jsonl":
        corpus = _load_jsonl(path)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    if not corpus.arguments:
        raise CorpusError(f"{path}: corpus contains no arguments")
    corpus.validate()
    n_args, n_kps, n_labels = corpus.counts()
    log.info("loaded corpus: %d arguments, %d key points, %d labels", n_args, n_kps, n_labels)
    return corpus


def partition_corpus(corpus: Corpus) -> list[Partition]:
    """Group arguments by (topic, stance), preserving corpus order.

    Every argument lands in exactly one partition; partitions are returned
    sorted by (topic_id, stance) for reproducibility.
    """
    groups: dict[tuple[str, Stance], list[str]] = {}
    for arg in corpus.arguments.values():
        groups.setdefault((arg.topic_id, arg.stance), []).append(arg.id)
    return [
        Partition(topic_id=topic_id, stance=stance, arg_ids=tuple(ids))
        for (topic_id, stance), ids in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
    ]


def reference_kps_for(corpus: Corpus, topic_id: str, stance: Stance) -> list[ReferenceKeyPoint]:
    """Reference key points of one partition, in file order."""
    return [kp for kp in corpus.reference_kps.values() if (kp.topic_id, kp.stance) == (topic_id, stance)]
