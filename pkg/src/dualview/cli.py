"""Command-line pipeline: every stage is a subcommand, every run leaves a
reproducibility manifest next to its primary output.

Exit codes: 0 success, 1 flag/input validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .agents import AgentConfig, HttpChatAgent, mock_agent
from .augment import (
    augment_corpus,
    load_chunks_sidecar,
    load_pseudo_queries_sidecar,
)
from .cost import CostModel, estimate_cost
from .embed import (
    HashingEncoder,
    HttpEncoder,
    VectorStore,
    encode_batch,
    load_store,
    save_store,
)
from .errors import DualviewError
from .evaluate import (
    alpha_sweep,
    describe,
    metric_by_name,
    similarity_gain,
    structure_stats,
)
from .ingest import (
    load_corpus,
    load_qrels,
    load_queries,
    read_run,
    subset,
    write_run,
)
from .manifest import RunManifest
from .retrieve import (
    Bm25Params,
    FusionConfig,
    ScoreTable,
    bm25_scores,
    fuse,
    global_scores,
    local_scores,
    rank,
)


class CliError(Exception):
    """Flag or input validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _require_files(*paths: str) -> list[str]:
    for path in paths:
        if not Path(path).is_file():
            raise CliError(f"input file not found: {path}")
    return list(paths)


def _write_json(payload: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _emit_manifest(args, inputs: list[str], default_anchor: str | Path) -> None:
    manifest_path = args.manifest or f"{default_anchor}.manifest.json"
    parameters = {
        key: value
        for key, value in vars(args).items()
        if key not in ("func", "manifest") and not key.startswith("_")
        and isinstance(value, (str, int, float, bool, type(None)))
    }
    RunManifest.collect(args._command, parameters, inputs).write(manifest_path)


def _aligned_table(rows: list[tuple], header: tuple) -> str:
    table = [tuple(str(cell) for cell in row) for row in [header, *rows]]
    widths = [max(len(row[col]) for row in table) for col in range(len(header))]
    lines = [
        "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
        for row in table
    ]
    return "\n".join(lines)


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise CliError("grid step must be positive")
        values = []
        index = 0
        while True:
            value = round(start + index * step, 10)
            if value > stop + 1e-12:
                break
            values.append(value)
            index += 1
        return values
    return [float(p) for p in text.split(",") if p.strip()]


def _passage_text(passage) -> str:
    return f"{passage.title} {passage.text}" if passage.title else passage.text


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_subset(args) -> None:
    inputs = _require_files(args.corpus, args.queries, args.qrels)
    if args.n_queries < 1:
        raise CliError("--n-queries must be >= 1")
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries)
    qrels = load_qrels(args.qrels)
    corpus_out, queries_out, qrels_out = subset(
        corpus, queries, qrels, args.n_queries, args.seed, args.distractors
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "corpus.jsonl", "w", encoding="utf-8") as handle:
        for p in corpus_out:
            record = {"_id": p.id, "text": p.text}
            if p.title is not None:
                record["title"] = p.title
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(out_dir / "queries.jsonl", "w", encoding="utf-8") as handle:
        for q in queries_out:
            handle.write(json.dumps({"_id": q.id, "text": q.text}, ensure_ascii=False) + "\n")
    with open(out_dir / "qrels.tsv", "w", encoding="utf-8") as handle:
        handle.write("query-id\tcorpus-id\tscore\n")
        for r in qrels_out:
            handle.write(f"{r.query_id}\t{r.passage_id}\t{r.relevance}\n")
    _emit_manifest(args, inputs, out_dir / "subset")
    print(
        f"subset: {len(queries_out)} queries, {len(corpus_out)} passages, "
        f"{len(qrels_out)} qrels -> {out_dir}"
    )


def _build_agent(args) -> tuple[AgentConfig, object]:
    try:
        config = AgentConfig(
            endpoint_url=args.endpoint or "",
            model_name=args.model or "",
            api_key_env_var=args.api_key_env or "",
            temperature=args.temperature,
            max_retries=args.retries,
            concurrency_limit=args.concurrency,
            skip_word_threshold=args.skip_threshold,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if args.agent == "mock":
        return config, mock_agent
    if not config.endpoint_url:
        raise CliError("--endpoint is required with --agent http")
    return config, HttpChatAgent(config)


def _cmd_augment(args) -> None:
    inputs = _require_files(args.corpus)
    config, agent = _build_agent(args)
    corpus = load_corpus(args.corpus)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chunks, pseudo_queries, stats = augment_corpus(corpus, config, agent, out_dir)
    _write_json(stats.to_dict(), out_dir / "augment_stats.json")
    _emit_manifest(args, inputs, out_dir / "augment")
    print(
        f"augment: {stats.passages} passages -> {stats.chunks} chunks, "
        f"{stats.pseudo_queries} pseudo-queries "
        f"(c/p={stats.chunks_per_passage:.2f}, pq/c={stats.pseudo_queries_per_chunk:.2f})"
    )


def _cmd_embed(args) -> None:
    inputs = _require_files(args.input)
    if args.encoder == "hashing":
        encoder = HashingEncoder(dim=args.dim, seed=args.seed)
    else:
        if not args.url:
            raise CliError("--url is required with --encoder http")
        encoder = HttpEncoder(args.url, role=args.role)
    if args.kind == "corpus":
        items = load_corpus(args.input)
        ids = [p.id for p in items]
        texts = [_passage_text(p) for p in items]
    elif args.kind == "queries":
        items = load_queries(args.input)
        ids = [q.id for q in items]
        texts = [q.text for q in items]
    else:
        items = load_pseudo_queries_sidecar(args.input)
        ids = [pq.id for pq in items]
        texts = [pq.text for pq in items]
    records = encode_batch(texts, encoder, ids=ids)
    dim = encoder.dim or (len(records[0].vector) if records else 0)
    if dim < 1:
        raise DualviewError("could not determine encoder dimension")
    store = VectorStore.from_records(records, dim=dim, normalized=True)
    save_store(store, args.out)
    _emit_manifest(args, inputs, args.out)
    print(f"embed: {len(store)} vectors (dim {store.dim}) -> {args.out}")


def _cmd_score_global(args) -> None:
    if args.top_k < 1:
        raise CliError("--top-k must be >= 1")
    if args.scorer == "dense":
        inputs = _require_files(args.queries_store, args.passages_store)
        query_store = load_store(args.queries_store)
        passage_store = load_store(args.passages_store)
        if query_store.dim != passage_store.dim:
            raise CliError(
                f"dimension mismatch: queries {query_store.dim} vs "
                f"passages {passage_store.dim}"
            )
        merged = VectorStore(dim=query_store.dim, normalized=query_store.normalized)
        for store in (query_store, passage_store):
            for record_id in store.ids:
                merged._add_raw(record_id, store.vector(record_id))
        table = global_scores(query_store.ids, passage_store.ids, merged, args.top_k)
    else:
        inputs = _require_files(args.queries_file, args.corpus)
        try:
            params = Bm25Params(k1=args.k1, b=args.b)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        queries = load_queries(args.queries_file)
        corpus = load_corpus(args.corpus)
        table = bm25_scores(queries, corpus, params, args.top_k)
    table.save_tsv(args.out)
    _emit_manifest(args, inputs, args.out)
    print(f"score-global: {len(table)} queries -> {args.out}")


def _cmd_score_local(args) -> None:
    inputs = _require_files(args.queries_store, args.pq_store, args.pq_sidecar)
    if args.top_k < 1:
        raise CliError("--top-k must be >= 1")
    query_store = load_store(args.queries_store)
    pq_store = load_store(args.pq_store)
    if query_store.dim != pq_store.dim:
        raise CliError(
            f"dimension mismatch: queries {query_store.dim} vs pqs {pq_store.dim}"
        )
    pseudo_queries = load_pseudo_queries_sidecar(args.pq_sidecar)
    merged = VectorStore(dim=query_store.dim, normalized=query_store.normalized)
    for store in (query_store, pq_store):
        for record_id in store.ids:
            merged._add_raw(record_id, store.vector(record_id))
    table = local_scores(query_store.ids, pseudo_queries, merged, args.top_k)
    table.save_tsv(args.out)
    _emit_manifest(args, inputs, args.out)
    print(f"score-local: {len(table)} queries -> {args.out}")


def _cmd_fuse(args) -> None:
    inputs = _require_files(args.global_scores, args.local_scores)
    try:
        config = FusionConfig(
            alpha=args.alpha,
            top_k=args.top_k,
            missing_local_policy=args.missing_local,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    global_table = ScoreTable.load_tsv(args.global_scores)
    local_table = ScoreTable.load_tsv(args.local_scores)
    entries = rank(fuse(global_table, local_table, config), tag=args.tag)
    write_run(entries, args.out)
    _emit_manifest(args, inputs, args.out)
    print(f"fuse: alpha={args.alpha:g} -> {args.out} ({len(entries)} entries)")


def _cmd_eval(args) -> None:
    inputs = _require_files(args.run, args.qrels)
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    try:
        metric_fns = [(name, metric_by_name(name)) for name in names]
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    run = read_run(args.run)
    qrels = load_qrels(args.qrels)
    reports = [fn(run, qrels) for _, fn in metric_fns]
    payload = {report.metric: report.to_dict() for report in reports}
    _write_json(payload, args.out)
    _emit_manifest(args, inputs, args.out)
    rows = [
        (report.metric, f"{report.mean:.6f}", len(report.per_query))
        for report in reports
    ]
    print(_aligned_table(rows, ("metric", "mean", "queries")))


def _cmd_sweep(args) -> None:
    inputs = _require_files(args.global_scores, args.local_scores, args.qrels)
    grid = _parse_grid(args.grid)
    global_table = ScoreTable.load_tsv(args.global_scores)
    local_table = ScoreTable.load_tsv(args.local_scores)
    qrels = load_qrels(args.qrels)
    try:
        sweep = alpha_sweep(
            global_table,
            local_table,
            qrels,
            grid=grid,
            metric=args.metric,
            top_k=args.top_k,
            missing_local_policy=args.missing_local,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    _write_json(sweep.to_dict(), args.out)
    if args.svg:
        from .charts import sweep_chart

        sweep_chart(sweep, args.svg)
    _emit_manifest(args, inputs, args.out)
    rows = [(f"{alpha:.1f}", f"{value:.6f}") for alpha, value in sweep.points]
    print(_aligned_table(rows, ("alpha", sweep.metric)))
    print(f"best alpha: {sweep.best_alpha:g}")


def _cmd_gain(args) -> None:
    inputs = _require_files(
        args.queries_store, args.passages_store, args.pq_store,
        args.pq_sidecar, args.qrels,
    )
    stores = [load_store(p) for p in (args.queries_store, args.passages_store, args.pq_store)]
    dims = {s.dim for s in stores}
    if len(dims) != 1:
        raise CliError(f"stores disagree on dimension: {sorted(dims)}")
    merged = VectorStore(dim=stores[0].dim, normalized=all(s.normalized for s in stores))
    for store in stores:
        for record_id in store.ids:
            merged._add_raw(record_id, store.vector(record_id))
    qrels = load_qrels(args.qrels)
    pseudo_queries = load_pseudo_queries_sidecar(args.pq_sidecar)
    analysis = similarity_gain(stores[0].ids, qrels, merged, pseudo_queries)
    payload = {
        "records": [
            {
                "query_id": r.query_id,
                "passage_id": r.passage_id,
                "best_pseudo_sim": r.best_pseudo_sim,
                "passage_sim": r.passage_sim,
                "gain": r.gain,
            }
            for r in analysis.records
        ],
        "skipped_pairs": analysis.skipped_pairs,
        "summary": describe(analysis.gains) if len(analysis.gains) >= 2 else {},
    }
    _write_json(payload, args.out)
    if args.svg_cdf:
        from .charts import gain_cdf_chart

        gain_cdf_chart(analysis, args.svg_cdf)
    if args.svg_box:
        from .charts import gain_box_chart

        gain_box_chart(analysis, args.svg_box)
    _emit_manifest(args, inputs, args.out)
    positive = sum(1 for g in analysis.gains if g > 0)
    total = len(analysis.gains)
    share = positive / total if total else 0.0
    print(
        f"gain: {total} pairs, {analysis.skipped_pairs} skipped, "
        f"{share:.1%} positive"
    )


def _cmd_stats(args) -> None:
    inputs = _require_files(args.corpus, args.queries, args.chunks, args.pseudo_queries)
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries)
    chunks = load_chunks_sidecar(args.chunks)
    pseudo_queries = load_pseudo_queries_sidecar(args.pseudo_queries)
    payload = structure_stats(corpus, queries, chunks, pseudo_queries)
    _write_json(payload, args.out)
    _emit_manifest(args, inputs, args.out)
    rows = [(key, f"{value:.4f}") for key, value in payload.items()]
    print(_aligned_table(rows, ("statistic", "value")))


def _cmd_cost(args) -> None:
    try:
        model = CostModel(
            input_price_per_token=args.input_price,
            output_price_per_token=args.output_price,
        )
        estimate = estimate_cost(args.passages, args.avg_tokens, args.avg_chunks, model)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if args.out:
        _write_json(estimate.to_dict(), args.out)
        _emit_manifest(args, [], args.out)
    rows = [
        ("input_tokens", estimate.input_tokens),
        ("output_tokens", estimate.output_tokens),
        ("total_cost", f"{estimate.total_cost:.6f}"),
    ]
    print(_aligned_table(rows, ("quantity", "value")))


# --------------------------------------------------------------------------
# parser assembly
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="dualview", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="_command", required=True, metavar="COMMAND")

    def command(name: str, func, help_text: str):
        sub = commands.add_parser(name, help=help_text)
        sub.set_defaults(func=func, _command=name)
        sub.add_argument("--manifest", default=None, help="manifest path override")
        return sub

    sub = command("subset", _cmd_subset, "deterministic desk-scale sample")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--queries", required=True)
    sub.add_argument("--qrels", required=True)
    sub.add_argument("--n-queries", type=int, required=True)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--distractors", type=int, default=None,
                     help="distractor passage count (default: keep all)")
    sub.add_argument("--out-dir", required=True)

    sub = command("augment", _cmd_augment, "chunk, resolve references, generate pseudo-queries")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.add_argument("--agent", choices=("mock", "http"), default="mock")
    sub.add_argument("--endpoint", default=None)
    sub.add_argument("--model", default=None)
    sub.add_argument("--api-key-env", default=None)
    sub.add_argument("--temperature", type=float, default=0.0)
    sub.add_argument("--skip-threshold", type=int, default=5000)
    sub.add_argument("--retries", type=int, default=2)
    sub.add_argument("--concurrency", type=int, default=4)

    sub = command("embed", _cmd_embed, "encode texts into a vector store")
    sub.add_argument("--kind", choices=("corpus", "queries", "pseudo-queries"), required=True)
    sub.add_argument("--input", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--encoder", choices=("hashing", "http"), default="hashing")
    sub.add_argument("--dim", type=int, default=256)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--url", default=None)
    sub.add_argument("--role", default=None, choices=(None, "query", "passage"))

    sub = command("score-global", _cmd_score_global, "dense or BM25 query-passage scores")
    sub.add_argument("--scorer", choices=("dense", "bm25"), default="dense")
    sub.add_argument("--queries-store", default=None)
    sub.add_argument("--passages-store", default=None)
    sub.add_argument("--queries-file", default=None)
    sub.add_argument("--corpus", default=None)
    sub.add_argument("--k1", type=float, default=1.2)
    sub.add_argument("--b", type=float, default=0.75)
    sub.add_argument("--top-k", type=int, default=1000)
    sub.add_argument("--out", required=True)

    sub = command("score-local", _cmd_score_local, "max-pooled pseudo-query scores")
    sub.add_argument("--queries-store", required=True)
    sub.add_argument("--pq-store", required=True)
    sub.add_argument("--pq-sidecar", required=True)
    sub.add_argument("--top-k", type=int, default=1000)
    sub.add_argument("--out", required=True)

    sub = command("fuse", _cmd_fuse, "interpolate global and local score tables")
    sub.add_argument("--global", dest="global_scores", required=True)
    sub.add_argument("--local", dest="local_scores", required=True)
    sub.add_argument("--alpha", type=float, required=True)
    sub.add_argument("--top-k", type=int, default=1000)
    sub.add_argument("--missing-local", choices=("use_global", "drop"), default="use_global")
    sub.add_argument("--tag", default="dualview")
    sub.add_argument("--out", required=True)

    sub = command("eval", _cmd_eval, "score a run file against qrels")
    sub.add_argument("--run", required=True)
    sub.add_argument("--qrels", required=True)
    sub.add_argument("--metrics", default="ndcg@10,mrr@10,recall@1000")
    sub.add_argument("--out", required=True)

    sub = command("sweep", _cmd_sweep, "metric across a fusion weight grid")
    sub.add_argument("--global", dest="global_scores", required=True)
    sub.add_argument("--local", dest="local_scores", required=True)
    sub.add_argument("--qrels", required=True)
    sub.add_argument("--grid", default="0:1:0.1")
    sub.add_argument("--metric", default="ndcg@10")
    sub.add_argument("--top-k", type=int, default=1000)
    sub.add_argument("--missing-local", choices=("use_global", "drop"), default="use_global")
    sub.add_argument("--out", required=True)
    sub.add_argument("--svg", default=None)

    sub = command("gain", _cmd_gain, "pseudo-query similarity gain analysis")
    sub.add_argument("--queries-store", required=True)
    sub.add_argument("--passages-store", required=True)
    sub.add_argument("--pq-store", required=True)
    sub.add_argument("--pq-sidecar", required=True)
    sub.add_argument("--qrels", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--svg-cdf", default=None)
    sub.add_argument("--svg-box", default=None)

    sub = command("stats", _cmd_stats, "corpus and augmentation structure statistics")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--queries", required=True)
    sub.add_argument("--chunks", required=True)
    sub.add_argument("--pseudo-queries", required=True)
    sub.add_argument("--out", required=True)

    sub = command("cost", _cmd_cost, "offline preprocessing cost estimate")
    sub.add_argument("--passages", type=int, required=True)
    sub.add_argument("--avg-tokens", type=int, required=True)
    sub.add_argument("--avg-chunks", type=int, required=True)
    sub.add_argument("--input-price", type=float, default=2e-6)
    sub.add_argument("--output-price", type=float, default=6e-6)
    sub.add_argument("--out", default=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    # dense/bm25 cross-flag requirements are easier to express here than in argparse
    if getattr(args, "_command", "") == "score-global":
        if args.scorer == "dense" and not (args.queries_store and args.passages_store):
            parser.print_usage(sys.stderr)
            sys.stderr.write("score-global --scorer dense needs --queries-store and --passages-store\n")
            return 1
        if args.scorer == "bm25" and not (args.queries_file and args.corpus):
            parser.print_usage(sys.stderr)
            sys.stderr.write("score-global --scorer bm25 needs --queries-file and --corpus\n")
            return 1

    try:
        args.func(args)
    except CliError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"dualview {args._command}: error: {exc}\n")
        return 1
    except (DualviewError, OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"dualview {args._command}: {type(exc).__name__}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
