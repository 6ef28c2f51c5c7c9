"""Passage augmentation: joint chunking + reference resolution, then
per-chunk pseudo-query generation, with resumable sidecar persistence.

Each passage is turned into self-contained chunks by a single agent call
(one prompt does both the segmentation and the pronoun resolution), and each
chunk then yields localized pseudo-queries. Very long passages skip chunking
entirely and are kept whole.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .agents import AgentConfig, chunk_letters, extract_json_array
from .errors import IntegrityError, ParseError, TransportError
from .ingest import Passage
from .prompts_io import render_chunking_prompt, render_pseudo_query_prompt

Agent = Callable[[str], str]

CHUNKS_SIDECAR = "chunks.jsonl"
PSEUDO_QUERIES_SIDECAR = "pseudo_queries.jsonl"
FALLBACK_TITLE_WORDS = 8


@dataclass(frozen=True)
class Chunk:
    passage_id: str
    chunk_id: str
    title: str
    text: str
    coref_resolved: bool = True

    def __post_init__(self) -> None:
        if not self.title or not self.text:
            raise IntegrityError(
                f"chunk {self.passage_id}/{self.chunk_id} has empty title or text"
            )


@dataclass(frozen=True)
class PseudoQuery:
    id: str
    passage_id: str
    chunk_id: str
    text: str

    def __post_init__(self) -> None:
        if not self.text:
            raise IntegrityError(f"pseudo-query {self.id} has empty text")


@dataclass
class AugmentCounters:
    """Mutable warning counters shared by the per-passage operations."""

    chunk_fallbacks: int = 0
    pseudo_query_failures: int = 0
    skipped_long_passages: int = 0


@dataclass
class AugmentStats:
    passages: int = 0
    chunks: int = 0
    pseudo_queries: int = 0
    counters: AugmentCounters = field(default_factory=AugmentCounters)

    @property
    def chunks_per_passage(self) -> float:
        return self.chunks / self.passages if self.passages else 0.0

    @property
    def pseudo_queries_per_chunk(self) -> float:
        return self.pseudo_queries / self.chunks if self.chunks else 0.0

    def to_dict(self) -> dict:
        return {
            "passages": self.passages,
            "chunks": self.chunks,
            "pseudo_queries": self.pseudo_queries,
            "chunks_per_passage": self.chunks_per_passage,
            "pseudo_queries_per_chunk": self.pseudo_queries_per_chunk,
            "skipped_long_passages": self.counters.skipped_long_passages,
            "chunk_fallbacks": self.counters.chunk_fallbacks,
            "pseudo_query_failures": self.counters.pseudo_query_failures,
        }


def _whole_passage_chunk(passage: Passage) -> Chunk:
    title = passage.title or " ".join(passage.text.split()[:FALLBACK_TITLE_WORDS])
    return Chunk(
        passage_id=passage.id,
        chunk_id="a",
        title=title,
        text=passage.text,
        coref_resolved=True,
    )


def chunk_and_resolve(
    passage: Passage,
    config: AgentConfig,
    agent: Agent,
    counters: AugmentCounters | None = None,
) -> list[Chunk]:
    """Segment a passage into self-contained chunks via the agent.

    Passages above the word threshold are returned as a single whole-passage
    chunk without calling the agent. Agent output that stays unparseable after
    the retry budget degrades to the same whole-passage fallback; transport
    failures after the budget propagate as TransportError.
    """
    if not passage.text.strip():
        raise ValueError(f"passage {passage.id!r} has empty text")
    if passage.word_count > config.skip_word_threshold:
        if counters is not None:
            counters.skipped_long_passages += 1
        return [_whole_passage_chunk(passage)]

    prompt = render_chunking_prompt(passage.text)
    transport_error: TransportError | None = None
    for _ in range(config.max_retries + 1):
        try:
            raw = agent(prompt)
        except TransportError as exc:
            transport_error = exc
            continue
        transport_error = None
        try:
            items = extract_json_array(raw)
        except ParseError:
            continue
        chunks = []
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                continue
            title = str(item.get("chunk_title", "")).strip()
            text = str(item.get("chunk_text", "")).strip()
            if not title or not text:
                continue
            chunks.append(
                Chunk(
                    passage_id=passage.id,
                    chunk_id=chunk_letters(len(chunks)),
                    title=title,
                    text=text,
                )
            )
        if chunks:
            return chunks
        # empty or element-less array: treat as a parse failure and retry
    if transport_error is not None:
        raise TransportError(
            f"chunking agent unreachable for passage {passage.id!r}: {transport_error}"
        )
    if counters is not None:
        counters.chunk_fallbacks += 1
    return [_whole_passage_chunk(passage)]


def generate_pseudo_queries(
    chunk: Chunk,
    config: AgentConfig,
    agent: Agent,
    counters: AugmentCounters | None = None,
) -> list[PseudoQuery]:
    """Generate localized pseudo-queries for one resolved chunk.

    Unparseable output after the retry budget yields an empty list (the
    passage then contributes no local signal); transport exhaustion raises.
    """
    if not chunk.coref_resolved:
        raise IntegrityError(
            f"chunk {chunk.passage_id}/{chunk.chunk_id} is not coreference-resolved"
        )
    prompt = render_pseudo_query_prompt(chunk.title, chunk.text)
    transport_error: TransportError | None = None
    for _ in range(config.max_retries + 1):
        try:
            raw = agent(prompt)
        except TransportError as exc:
            transport_error = exc
            continue
        transport_error = None
        try:
            items = extract_json_array(raw)
        except ParseError:
            continue
        queries = []
        for item in items:
            if not isinstance(item, dict):
                continue
            text = str(item.get("pseudo_query", "")).strip()
            if not text:
                continue
            queries.append(
                PseudoQuery(
                    id=f"{chunk.passage_id}::{chunk.chunk_id}::{len(queries)}",
                    passage_id=chunk.passage_id,
                    chunk_id=chunk.chunk_id,
                    text=text,
                )
            )
        return queries
    if transport_error is not None:
        raise TransportError(
            f"pseudo-query agent unreachable for chunk "
            f"{chunk.passage_id}/{chunk.chunk_id}: {transport_error}"
        )
    if counters is not None:
        counters.pseudo_query_failures += 1
    return []


def _chunk_record(chunk: Chunk) -> dict:
    return {
        "passage_id": chunk.passage_id,
        "chunk_id": chunk.chunk_id,
        "chunk_title": chunk.title,
        "chunk_text": chunk.text,
    }


def _pseudo_query_record(pq: PseudoQuery) -> dict:
    return {
        "id": pq.id,
        "passage_id": pq.passage_id,
        "chunk_id": pq.chunk_id,
        "pseudo_query": pq.text,
    }


def load_chunks_sidecar(path: str | Path) -> list[Chunk]:
    chunks: list[Chunk] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            chunks.append(
                Chunk(
                    passage_id=str(obj["passage_id"]),
                    chunk_id=str(obj["chunk_id"]),
                    title=str(obj["chunk_title"]),
                    text=str(obj["chunk_text"]),
                )
            )
    return chunks


def load_pseudo_queries_sidecar(path: str | Path) -> list[PseudoQuery]:
    queries: list[PseudoQuery] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            queries.append(
                PseudoQuery(
                    id=str(obj["id"]),
                    passage_id=str(obj["passage_id"]),
                    chunk_id=str(obj["chunk_id"]),
                    text=str(obj["pseudo_query"]),
                )
            )
    return queries


def _augment_one(
    passage: Passage, config: AgentConfig, agent: Agent, counters: AugmentCounters
) -> tuple[list[Chunk], list[PseudoQuery]]:
    chunks = chunk_and_resolve(passage, config, agent, counters)
    queries: list[PseudoQuery] = []
    for chunk in chunks:
        queries.extend(generate_pseudo_queries(chunk, config, agent, counters))
    return chunks, queries


def augment_corpus(
    corpus: list[Passage],
    config: AgentConfig,
    agent: Agent,
    out_dir: str | Path | None = None,
) -> tuple[list[Chunk], list[PseudoQuery], AugmentStats]:
    """Augment every passage with bounded concurrency.

    With ``out_dir`` set, chunk and pseudo-query sidecars are appended as each
    passage completes; a re-run resumes by skipping passage ids already present
    in the chunks sidecar. Results are merged in corpus order regardless of
    worker completion order.
    """
    counters = AugmentCounters()
    chunks_by_passage: dict[str, list[Chunk]] = {}
    queries_by_passage: dict[str, list[PseudoQuery]] = {}
    completed: set[str] = set()

    chunks_path = queries_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        chunks_path = out_dir / CHUNKS_SIDECAR
        queries_path = out_dir / PSEUDO_QUERIES_SIDECAR
        if chunks_path.exists():
            for chunk in load_chunks_sidecar(chunks_path):
                chunks_by_passage.setdefault(chunk.passage_id, []).append(chunk)
                completed.add(chunk.passage_id)
        if queries_path.exists():
            for pq in load_pseudo_queries_sidecar(queries_path):
                queries_by_passage.setdefault(pq.passage_id, []).append(pq)

    pending = [p for p in corpus if p.id not in completed]
    if pending:
        with ThreadPoolExecutor(max_workers=config.concurrency_limit) as pool:
            results = pool.map(
                lambda p: (p.id, _augment_one(p, config, agent, counters)), pending
            )
            for pid, (chunks, queries) in results:
                chunks_by_passage[pid] = chunks
                queries_by_passage[pid] = queries

    if chunks_path is not None and queries_path is not None and pending:
        with open(chunks_path, "a", encoding="utf-8") as chunk_file, open(
            queries_path, "a", encoding="utf-8"
        ) as query_file:
            for passage in pending:
                for chunk in chunks_by_passage.get(passage.id, []):
                    chunk_file.write(
                        json.dumps(_chunk_record(chunk), ensure_ascii=False) + "\n"
                    )
                for pq in queries_by_passage.get(passage.id, []):
                    query_file.write(
                        json.dumps(_pseudo_query_record(pq), ensure_ascii=False) + "\n"
                    )

    all_chunks: list[Chunk] = []
    all_queries: list[PseudoQuery] = []
    for passage in corpus:
        all_chunks.extend(chunks_by_passage.get(passage.id, []))
        all_queries.extend(queries_by_passage.get(passage.id, []))

    stats = AugmentStats(
        passages=len(corpus),
        chunks=len(all_chunks),
        pseudo_queries=len(all_queries),
        counters=counters,
    )
    return all_chunks, all_queries, stats
