"""Dual-view scoring: global (dense or BM25), local max-pooled, fusion, ranking.

Score tables are sparse per-query maps; a missing entry means "no evidence",
never zero. Every retention and ranking step breaks score ties by ascending
passage id so identical inputs always produce identical run files.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import PseudoQuery
from .embed import VectorStore, row_dots
from .errors import ParseError
from .ingest import Passage, Query, RunEntry

CENSOR_EPS = 1e-6
TOKEN_RE = re.compile(r"[a-z0-9]+")


class ScoreTable:
    """Sparse query -> passage -> score map with 9-decimal TSV persistence."""

    def __init__(self, scores: dict[str, dict[str, float]] | None = None):
        self._scores: dict[str, dict[str, float]] = {}
        if scores:
            for qid, per_passage in scores.items():
                for pid, score in per_passage.items():
                    self.set(qid, pid, score)

    def set(self, query_id: str, passage_id: str, score: float) -> None:
        if not math.isfinite(score):
            raise ValueError(f"non-finite score for ({query_id}, {passage_id})")
        self._scores.setdefault(query_id, {})[passage_id] = float(score)

    def max_update(self, query_id: str, passage_id: str, score: float) -> None:
        current = self._scores.get(query_id, {}).get(passage_id)
        if current is None or score > current:
            self.set(query_id, passage_id, score)

    def get(self, query_id: str, passage_id: str, default: float | None = None):
        return self._scores.get(query_id, {}).get(passage_id, default)

    def per_query(self, query_id: str) -> dict[str, float]:
        return dict(self._scores.get(query_id, {}))

    def query_ids(self) -> list[str]:
        return sorted(self._scores)

    def __len__(self) -> int:
        return len(self._scores)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ScoreTable) and self._scores == other._scores

    def scale(self, factor: float) -> "ScoreTable":
        scaled = ScoreTable()
        for qid, per_passage in self._scores.items():
            for pid, score in per_passage.items():
                scaled.set(qid, pid, score * factor)
        return scaled

    def save_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for qid in sorted(self._scores):
                for pid in sorted(self._scores[qid]):
                    handle.write(f"{qid}\t{pid}\t{self._scores[qid][pid]:.9f}\n")

    @classmethod
    def load_tsv(cls, path: str | Path) -> "ScoreTable":
        table = cls()
        with open(path, "r", encoding="utf-8") as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) != 3:
                    raise ParseError(f"{path}:{line_no}: expected 3 columns")
                try:
                    table.set(parts[0], parts[1], float(parts[2]))
                except ValueError as exc:
                    raise ParseError(f"{path}:{line_no}: bad score {parts[2]!r}") from exc
        return table


@dataclass
class FusionConfig:
    alpha: float
    top_k: int = 1000
    missing_local_policy: str = "use_global"

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.missing_local_policy not in ("use_global", "drop"):
            raise ValueError(
                f"missing_local_policy must be 'use_global' or 'drop', "
                f"got {self.missing_local_policy!r}"
            )


@dataclass
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


def _top_k_items(scores: dict[str, float], top_k: int) -> list[tuple[str, float]]:
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]


def _ids(items) -> list[str]:
    """Accept domain objects (anything with .id) or plain id strings."""
    return [item.id if hasattr(item, "id") else str(item) for item in items]


def _similarities(store: VectorStore, matrix: np.ndarray,
                  row_norms: np.ndarray | None, query_vec: np.ndarray) -> np.ndarray:
    """Cosine of the query against every matrix row; plain dots when the
    store is pre-normalized."""
    sims = row_dots(matrix, query_vec)
    if not store.normalized:
        q_norm = math.sqrt(float(np.multiply(query_vec, query_vec).sum()))
        if q_norm == 0.0:
            raise ValueError("query vector has zero norm")
        sims = sims / (row_norms * q_norm)
    return sims


def _row_norms(matrix: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.multiply(matrix, matrix).sum(axis=1))
    if np.any(norms == 0.0):
        raise ValueError("store contains a zero-norm vector")
    return norms


def global_scores(
    queries: list[Query] | list[str],
    passages: list[Passage] | list[str],
    store: VectorStore,
    top_k: int = 1000,
) -> ScoreTable:
    """Direct query-passage cosine, top_k retained per query.

    ``queries`` and ``passages`` may be domain objects or plain id strings;
    only the ids matter here since the texts are already embedded.
    """
    table = ScoreTable()
    passage_ids = _ids(passages)
    matrix = store.matrix(passage_ids)
    norms = None if store.normalized else _row_norms(matrix)
    for qid in _ids(queries):
        query_vec = store.vector(qid).astype(np.float64)
        sims = _similarities(store, matrix, norms, query_vec)
        scores = {pid: float(sims[i]) for i, pid in enumerate(passage_ids)}
        for pid, score in _top_k_items(scores, top_k):
            table.set(qid, pid, score)
    return table


def bm25_scores(
    queries: list[Query],
    passages: list[Passage],
    params: Bm25Params | None = None,
    top_k: int = 1000,
) -> ScoreTable:
    """Okapi BM25 over lowercase alphanumeric tokens (title + text).

    idf = ln(1 + (N - df + 0.5) / (df + 0.5)); a query term contributes
    idf * tf*(k1+1) / (tf + k1*(1 - b + b*|d|/avgdl)) per occurrence in the
    query. Documents matching no query term stay absent from the table.
    """
    if not passages:
        raise ValueError("empty corpus")
    params = params or Bm25Params()

    doc_len: dict[str, int] = {}
    postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for passage in passages:
        text = f"{passage.title} {passage.text}" if passage.title else passage.text
        tokens = TOKEN_RE.findall(text.lower())
        doc_len[passage.id] = len(tokens)
        counts: dict[str, int] = defaultdict(int)
        for token in tokens:
            counts[token] += 1
        for term, tf in counts.items():
            postings[term].append((passage.id, tf))

    n_docs = len(passages)
    avgdl = sum(doc_len.values()) / n_docs
    idf = {
        term: math.log(1 + (n_docs - len(plist) + 0.5) / (len(plist) + 0.5))
        for term, plist in postings.items()
    }

    table = ScoreTable()
    for query in queries:
        scores: dict[str, float] = defaultdict(float)
        for term in TOKEN_RE.findall(query.text.lower()):
            if term not in postings:
                continue
            for pid, tf in postings[term]:
                denom = tf + params.k1 * (1 - params.b + params.b * doc_len[pid] / avgdl)
                scores[pid] += idf[term] * tf * (params.k1 + 1) / denom
        for pid, score in _top_k_items(scores, top_k):
            table.set(query.id, pid, score)
    return table


def local_scores(
    queries: list[Query] | list[str],
    pseudo_queries: list[PseudoQuery],
    store: VectorStore,
    top_k: int = 1000,
) -> ScoreTable:
    """Max-pooled local relevance: per passage, the best cosine between the
    query and any pseudo-query generated from that passage. Passages without
    pseudo-queries are absent from the result."""
    table = ScoreTable()
    if not pseudo_queries:
        return table
    pq_ids = [pq.id for pq in pseudo_queries]
    parents = [pq.passage_id for pq in pseudo_queries]
    unique_parents = sorted(set(parents))
    parent_row = {pid: i for i, pid in enumerate(unique_parents)}
    parent_idx = np.array([parent_row[p] for p in parents])

    matrix = store.matrix(pq_ids)
    norms = None if store.normalized else _row_norms(matrix)
    for qid in _ids(queries):
        query_vec = store.vector(qid).astype(np.float64)
        sims = _similarities(store, matrix, norms, query_vec)
        best = np.full(len(unique_parents), -np.inf)
        np.maximum.at(best, parent_idx, sims)
        scores = {pid: float(best[parent_row[pid]]) for pid in unique_parents}
        for pid, score in _top_k_items(scores, top_k):
            table.set(qid, pid, score)
    return table


def fuse(
    global_table: ScoreTable,
    local_table: ScoreTable,
    config: FusionConfig,
) -> ScoreTable:
    """Interpolate global and local scores: alpha*g + (1-alpha)*l.

    Works over the union of passages present in either table per query. A
    missing global score is censored to (min retained global score - 1e-6);
    a missing local score either falls back to the global value
    (``use_global``) or to that same censored floor (``drop``).
    """
    fused = ScoreTable()
    query_ids = sorted(set(global_table.query_ids()) | set(local_table.query_ids()))
    for qid in query_ids:
        g = global_table.per_query(qid)
        l = local_table.per_query(qid)
        retained = g if g else l
        if not retained:
            continue
        floor = min(retained.values()) - CENSOR_EPS
        scores: dict[str, float] = {}
        for pid in set(g) | set(l):
            g_eff = g.get(pid, floor)
            if pid in l:
                l_eff = l[pid]
            elif config.missing_local_policy == "use_global":
                l_eff = g_eff
            else:
                l_eff = floor
            scores[pid] = config.alpha * g_eff + (1.0 - config.alpha) * l_eff
        for pid, score in _top_k_items(scores, config.top_k):
            fused.set(qid, pid, score)
    return fused


def rank(table: ScoreTable, tag: str) -> list[RunEntry]:
    """Turn a score table into run entries: descending score, ties by
    ascending passage id, ranks 1..n, queries in ascending id order."""
    entries: list[RunEntry] = []
    for qid in table.query_ids():
        ordered = _top_k_items(table.per_query(qid), top_k=len(table.per_query(qid)))
        for position, (pid, score) in enumerate(ordered, start=1):
            entries.append(
                RunEntry(query_id=qid, passage_id=pid, rank=position, score=score, tag=tag)
            )
    return entries
