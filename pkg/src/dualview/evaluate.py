"""Evaluation: ranked-retrieval metrics, similarity-gain analysis, descriptive
statistics, corpus structure statistics and the fusion-weight sweep.

Metric conventions follow the standard TREC evaluation behavior: exponential
nDCG gain (2^rel - 1), macro-averages over queries that appear in the run and
have at least one relevant judgment, and queries without relevant documents
excluded from the average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .augment import PseudoQuery
from .embed import VectorStore, cosine
from .ingest import Qrel, Query, RunEntry
from .retrieve import FusionConfig, ScoreTable, fuse, rank


@dataclass
class MetricReport:
    metric: str
    per_query: dict[str, float]
    mean: float
    skipped_queries: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean": self.mean,
            "per_query": dict(sorted(self.per_query.items())),
            "skipped_queries": sorted(self.skipped_queries),
        }


@dataclass(frozen=True)
class GainRecord:
    query_id: str
    passage_id: str
    best_pseudo_sim: float
    passage_sim: float

    @property
    def gain(self) -> float:
        return self.best_pseudo_sim - self.passage_sim


@dataclass
class GainAnalysis:
    records: list[GainRecord]
    skipped_pairs: int

    @property
    def gains(self) -> list[float]:
        return [r.gain for r in self.records]


@dataclass
class SweepResult:
    metric: str
    points: list[tuple[float, float]]
    best_alpha: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "points": [[alpha, value] for alpha, value in self.points],
            "best_alpha": self.best_alpha,
        }


def _group_run(run: list[RunEntry]) -> dict[str, list[RunEntry]]:
    grouped: dict[str, list[RunEntry]] = {}
    for entry in run:
        grouped.setdefault(entry.query_id, []).append(entry)
    for entries in grouped.values():
        entries.sort(key=lambda e: e.rank)
    return grouped


def _group_qrels(qrels: list[Qrel]) -> dict[str, dict[str, int]]:
    grouped: dict[str, dict[str, int]] = {}
    for qrel in qrels:
        grouped.setdefault(qrel.query_id, {})[qrel.passage_id] = qrel.relevance
    return grouped


def _evaluated_queries(
    grouped_run: dict[str, list[RunEntry]],
    grouped_qrels: dict[str, dict[str, int]],
) -> tuple[list[str], list[str]]:
    """Queries to score and queries skipped (unjudged or zero relevant)."""
    evaluated, skipped = [], []
    for qid in sorted(grouped_run):
        judgments = grouped_qrels.get(qid)
        if judgments is None or not any(rel > 0 for rel in judgments.values()):
            skipped.append(qid)
        else:
            evaluated.append(qid)
    return evaluated, skipped


def _finish(metric: str, per_query: dict[str, float], skipped: list[str]) -> MetricReport:
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return MetricReport(metric=metric, per_query=per_query, mean=mean, skipped_queries=skipped)


def ndcg_at_k(run: list[RunEntry], qrels: list[Qrel], k: int = 10) -> MetricReport:
    grouped_run = _group_run(run)
    grouped_qrels = _group_qrels(qrels)
    evaluated, skipped = _evaluated_queries(grouped_run, grouped_qrels)
    per_query: dict[str, float] = {}
    for qid in evaluated:
        judgments = grouped_qrels[qid]
        dcg = 0.0
        for position, entry in enumerate(grouped_run[qid][:k], start=1):
            rel = judgments.get(entry.passage_id, 0)
            if rel > 0:
                dcg += (2**rel - 1) / math.log2(position + 1)
        ideal = sorted((rel for rel in judgments.values() if rel > 0), reverse=True)
        idcg = sum(
            (2**rel - 1) / math.log2(position + 1)
            for position, rel in enumerate(ideal[:k], start=1)
        )
        per_query[qid] = dcg / idcg
    return _finish(f"ndcg@{k}", per_query, skipped)


def mrr_at_k(run: list[RunEntry], qrels: list[Qrel], k: int = 10) -> MetricReport:
    grouped_run = _group_run(run)
    grouped_qrels = _group_qrels(qrels)
    evaluated, skipped = _evaluated_queries(grouped_run, grouped_qrels)
    per_query: dict[str, float] = {}
    for qid in evaluated:
        judgments = grouped_qrels[qid]
        value = 0.0
        for position, entry in enumerate(grouped_run[qid][:k], start=1):
            if judgments.get(entry.passage_id, 0) > 0:
                value = 1.0 / position
                break
        per_query[qid] = value
    return _finish(f"mrr@{k}", per_query, skipped)


def recall_at_k(run: list[RunEntry], qrels: list[Qrel], k: int = 1000) -> MetricReport:
    grouped_run = _group_run(run)
    grouped_qrels = _group_qrels(qrels)
    evaluated, skipped = _evaluated_queries(grouped_run, grouped_qrels)
    per_query: dict[str, float] = {}
    for qid in evaluated:
        relevant = {pid for pid, rel in grouped_qrels[qid].items() if rel > 0}
        retrieved = {entry.passage_id for entry in grouped_run[qid][:k]}
        per_query[qid] = len(relevant & retrieved) / len(relevant)
    return _finish(f"recall@{k}", per_query, skipped)


METRICS = {
    "ndcg": ndcg_at_k,
    "mrr": mrr_at_k,
    "recall": recall_at_k,
}


def metric_by_name(name: str):
    """Resolve 'ndcg@10' style names to a (run, qrels) -> MetricReport callable."""
    base, _, k_str = name.partition("@")
    base = base.strip().lower()
    if base not in METRICS or not k_str:
        raise ValueError(f"unknown metric {name!r}; expected e.g. 'ndcg@10'")
    try:
        k = int(k_str)
    except ValueError as exc:
        raise ValueError(f"bad cutoff in metric {name!r}") from exc
    if k < 1:
        raise ValueError(f"metric cutoff must be >= 1 in {name!r}")
    fn = METRICS[base]
    return lambda run, qrels: fn(run, qrels, k=k)


def similarity_gain(
    queries: list[Query] | list[str],
    qrels: list[Qrel],
    store: VectorStore,
    pseudo_queries: list[PseudoQuery],
) -> GainAnalysis:
    """Per judged-relevant (query, passage) pair: best pseudo-query cosine
    minus the direct passage cosine. Pairs whose passage has no pseudo-queries
    are skipped and counted. ``queries`` may be objects or id strings."""
    by_passage: dict[str, list[PseudoQuery]] = {}
    for pq in pseudo_queries:
        by_passage.setdefault(pq.passage_id, []).append(pq)
    grouped_qrels = _group_qrels(qrels)
    query_ids = {q.id if hasattr(q, "id") else str(q) for q in queries}

    records: list[GainRecord] = []
    skipped = 0
    for qid in sorted(grouped_qrels):
        if qid not in query_ids:
            continue
        query_vec = store.vector(qid)
        for pid in sorted(grouped_qrels[qid]):
            if grouped_qrels[qid][pid] <= 0:
                continue
            pqs = by_passage.get(pid)
            if not pqs:
                skipped += 1
                continue
            passage_sim = cosine(query_vec, store.vector(pid))
            best = max(cosine(query_vec, store.vector(pq.id)) for pq in pqs)
            records.append(
                GainRecord(
                    query_id=qid,
                    passage_id=pid,
                    best_pseudo_sim=best,
                    passage_sim=passage_sim,
                )
            )
    return GainAnalysis(records=records, skipped_pairs=skipped)


def _quantile(ordered: list[float], q: float) -> float:
    """Linear interpolation between order statistics (inclusive method)."""
    position = (len(ordered) - 1) * q
    low = math.floor(position)
    high = math.ceil(position)
    if low == high:
        return ordered[low]
    weight = position - low
    return ordered[low] * (1 - weight) + ordered[high] * weight


def describe(values: list[float]) -> dict[str, float]:
    """Descriptive statistics: mean, sample std/variance, min, quantiles
    (10/25/50/75), max, moment skewness, excess kurtosis and std/mean."""
    n = len(values)
    if n == 0:
        raise ValueError("describe needs at least one value")
    if n == 1:
        raise ValueError("sample standard deviation is undefined for n=1")
    mean = sum(values) / n
    centered = [v - mean for v in values]
    m2 = sum(c**2 for c in centered) / n
    m3 = sum(c**3 for c in centered) / n
    m4 = sum(c**4 for c in centered) / n
    variance = sum(c**2 for c in centered) / (n - 1)
    std = math.sqrt(variance)
    ordered = sorted(values)
    return {
        "count": float(n),
        "mean": mean,
        "std": std,
        "variance": variance,
        "min": ordered[0],
        "q10": _quantile(ordered, 0.10),
        "q25": _quantile(ordered, 0.25),
        "median": _quantile(ordered, 0.50),
        "q75": _quantile(ordered, 0.75),
        "max": ordered[-1],
        "skewness": m3 / m2**1.5 if m2 > 0 else 0.0,
        "kurtosis": m4 / m2**2 - 3.0 if m2 > 0 else 0.0,
        "std_over_mean": std / mean if mean != 0 else math.nan,
    }


def structure_stats(corpus, queries, chunks, pseudo_queries) -> dict[str, float]:
    """Corpus shape: average lengths, passage/query length ratio, chunks per
    passage, pseudo-queries per chunk and the index expansion factor."""
    if not corpus:
        raise ValueError("empty corpus")
    if not queries:
        raise ValueError("empty query set")
    avg_passage_len = sum(p.word_count for p in corpus) / len(corpus)
    avg_query_len = sum(len(q.text.split()) for q in queries) / len(queries)
    return {
        "avg_query_len": avg_query_len,
        "avg_passage_len": avg_passage_len,
        "len_ratio": avg_passage_len / avg_query_len if avg_query_len else math.nan,
        "c_per_p": len(chunks) / len(corpus),
        "pq_per_c": len(pseudo_queries) / len(chunks) if chunks else 0.0,
        "index_expansion_factor": len(pseudo_queries) / len(corpus),
    }


DEFAULT_ALPHA_GRID = [round(i / 10, 1) for i in range(11)]


def alpha_sweep(
    global_table: ScoreTable,
    local_table: ScoreTable,
    qrels: list[Qrel],
    grid: list[float] | None = None,
    metric: str = "ndcg@10",
    top_k: int = 1000,
    missing_local_policy: str = "use_global",
    tag: str = "sweep",
) -> SweepResult:
    """Fuse + rank + evaluate at every alpha in the grid.

    The best alpha is the argmax of the metric mean, ties broken toward the
    larger (more global) alpha.
    """
    if grid is None:
        grid = list(DEFAULT_ALPHA_GRID)
    if not grid:
        raise ValueError("alpha grid is empty")
    ordered_grid = sorted(grid)
    if len(set(ordered_grid)) != len(ordered_grid):
        raise ValueError("alpha grid has duplicate values")
    if ordered_grid[0] < 0.0 or ordered_grid[-1] > 1.0:
        raise ValueError("alpha grid values must lie in [0, 1]")

    metric_fn = metric_by_name(metric)
    points: list[tuple[float, float]] = []
    best_alpha = ordered_grid[0]
    best_value = -math.inf
    for alpha in ordered_grid:
        config = FusionConfig(
            alpha=alpha, top_k=top_k, missing_local_policy=missing_local_policy
        )
        run = rank(fuse(global_table, local_table, config), tag=tag)
        value = metric_fn(run, qrels).mean
        points.append((alpha, value))
        if value >= best_value:
            best_value = value
            best_alpha = alpha
    return SweepResult(metric=metric, points=points, best_alpha=best_alpha)
