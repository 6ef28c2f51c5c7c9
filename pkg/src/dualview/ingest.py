"""Corpus, query, qrel and run-file I/O plus deterministic subset sampling.

File formats:
  - corpus / queries: JSON-lines with ``_id``, ``text`` and (corpus only)
    optional ``title`` fields.
  - qrels: tab-separated ``query-id \\t passage-id \\t relevance``; a header
    line starting with ``query-id`` is skipped.
  - run files: ``query_id Q0 passage_id rank score tag`` with the score
    printed to 6 decimal places.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityError, ParseError


@dataclass(frozen=True)
class Passage:
    """One retrievable unit of text. ``word_count`` is derived from ``text``."""

    id: str
    text: str
    title: str | None = None
    word_count: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise IntegrityError("passage id must be a nonempty string")
        object.__setattr__(self, "word_count", len(self.text.split()))


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id:
            raise IntegrityError("query id must be a nonempty string")
        if not self.text:
            raise IntegrityError(f"query {self.id!r} has empty text")


@dataclass(frozen=True)
class Qrel:
    query_id: str
    passage_id: str
    relevance: int

    def __post_init__(self) -> None:
        if self.relevance < 0:
            raise IntegrityError(
                f"qrel ({self.query_id}, {self.passage_id}) has negative relevance"
            )


@dataclass(frozen=True)
class RunEntry:
    query_id: str
    passage_id: str
    rank: int
    score: float
    tag: str


def _iter_json_lines(path: str | Path):
    """Yield (line_no, parsed object) for every nonblank line of a JSONL file."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{line_no}: expected a JSON object")
            yield line_no, obj


def load_corpus(path: str | Path) -> list[Passage]:
    """Load a JSONL corpus, preserving file order.

    Raises ParseError on malformed lines (naming the line number) and
    IntegrityError on duplicate ``_id`` values.
    """
    passages: list[Passage] = []
    seen: set[str] = set()
    for line_no, obj in _iter_json_lines(path):
        if "_id" not in obj or "text" not in obj:
            raise ParseError(f"{path}:{line_no}: missing '_id' or 'text' field")
        pid = str(obj["_id"])
        if not pid:
            raise ParseError(f"{path}:{line_no}: empty '_id'")
        if pid in seen:
            raise IntegrityError(f"{path}:{line_no}: duplicate passage id {pid!r}")
        seen.add(pid)
        title = obj.get("title")
        if title is not None:
            title = str(title) or None
        passages.append(Passage(id=pid, text=str(obj["text"]), title=title))
    return passages


def load_queries(path: str | Path) -> list[Query]:
    queries: list[Query] = []
    seen: set[str] = set()
    for line_no, obj in _iter_json_lines(path):
        if "_id" not in obj or "text" not in obj:
            raise ParseError(f"{path}:{line_no}: missing '_id' or 'text' field")
        qid = str(obj["_id"])
        text = str(obj["text"])
        if not qid or not text:
            raise ParseError(f"{path}:{line_no}: empty '_id' or 'text'")
        if qid in seen:
            raise IntegrityError(f"{path}:{line_no}: duplicate query id {qid!r}")
        seen.add(qid)
        queries.append(Query(id=qid, text=text))
    return queries


def load_qrels(path: str | Path) -> list[Qrel]:
    qrels: list[Qrel] = []
    seen: set[tuple[str, str]] = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line_no == 1 and line.startswith("query-id"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"{path}:{line_no}: expected 3 tab-separated columns, got {len(parts)}"
                )
            qid, pid, rel_str = (p.strip() for p in parts)
            try:
                rel = int(rel_str)
            except ValueError as exc:
                raise ParseError(
                    f"{path}:{line_no}: non-integer relevance {rel_str!r}"
                ) from exc
            if (qid, pid) in seen:
                raise IntegrityError(f"{path}:{line_no}: duplicate qrel ({qid}, {pid})")
            seen.add((qid, pid))
            qrels.append(Qrel(query_id=qid, passage_id=pid, relevance=rel))
    return qrels


def validate_run(entries: list[RunEntry]) -> None:
    """Check RunEntry invariants: per query, ranks are 1..n with no gaps or
    duplicates and scores are non-increasing with rank."""
    by_query: dict[str, list[RunEntry]] = {}
    for entry in entries:
        if entry.rank < 1:
            raise IntegrityError(
                f"run entry ({entry.query_id}, {entry.passage_id}) has rank {entry.rank} < 1"
            )
        by_query.setdefault(entry.query_id, []).append(entry)
    for qid, group in by_query.items():
        ranks = sorted(e.rank for e in group)
        if ranks != list(range(1, len(group) + 1)):
            raise IntegrityError(f"query {qid!r}: ranks are not a gapless 1..n sequence")
        ordered = sorted(group, key=lambda e: e.rank)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.score > prev.score:
                raise IntegrityError(
                    f"query {qid!r}: score increases from rank {prev.rank} to {cur.rank}"
                )


def write_run(entries: list[RunEntry], path: str | Path) -> None:
    """Write entries in TREC run format; refuses to write invalid runs."""
    validate_run(entries)
    for entry in entries:
        for label, value in (("query_id", entry.query_id),
                             ("passage_id", entry.passage_id),
                             ("tag", entry.tag)):
            if not value or any(ch.isspace() for ch in value):
                raise IntegrityError(f"run entry {label} {value!r} is empty or has whitespace")
    with open(path, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(
                f"{entry.query_id} Q0 {entry.passage_id} {entry.rank} "
                f"{entry.score:.6f} {entry.tag}\n"
            )


def read_run(path: str | Path) -> list[RunEntry]:
    entries: list[RunEntry] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) != 6 or parts[1] != "Q0":
                raise ParseError(f"{path}:{line_no}: not a valid run line: {line!r}")
            qid, _, pid, rank_str, score_str, tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: bad rank or score") from exc
            entries.append(RunEntry(query_id=qid, passage_id=pid, rank=rank,
                                    score=score, tag=tag))
    validate_run(entries)
    return entries


def subset(
    corpus: list[Passage],
    queries: list[Query],
    qrels: list[Qrel],
    n_queries: int,
    seed: int,
    n_distractors: int | None = None,
) -> tuple[list[Passage], list[Query], list[Qrel]]:
    """Deterministic desk-scale sample.

    Samples ``n_queries`` judged queries with ``seed``, keeps every judged
    passage of the sampled queries, and adds distractor passages drawn from
    the rest of the corpus. ``n_distractors=None`` keeps all remaining
    passages, so sampling the full judged query set returns the full corpus.
    """
    judged_ids = sorted({r.query_id for r in qrels} & {q.id for q in queries})
    if n_queries > len(judged_ids):
        raise ValueError(
            f"n_queries={n_queries} exceeds the {len(judged_ids)} judged queries"
        )
    rng = random.Random(seed)
    sampled = set(rng.sample(judged_ids, n_queries))

    corpus_ids = {p.id for p in corpus}
    judged_passages = {
        r.passage_id for r in qrels if r.query_id in sampled and r.passage_id in corpus_ids
    }
    pool = sorted(corpus_ids - judged_passages)
    if n_distractors is None:
        distractors = set(pool)
    else:
        distractors = set(rng.sample(pool, min(n_distractors, len(pool))))

    keep = judged_passages | distractors
    corpus_out = [p for p in corpus if p.id in keep]
    queries_out = [q for q in queries if q.id in sampled]
    qrels_out = [
        r for r in qrels if r.query_id in sampled and r.passage_id in keep
    ]
    return corpus_out, queries_out, qrels_out
