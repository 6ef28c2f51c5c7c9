import json
from pathlib import Path

import pytest


def write_dataset(directory: Path, corpus, queries, qrels) -> dict[str, Path]:
    """Materialize domain objects as the on-disk formats the CLI consumes."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": directory / "corpus.jsonl",
        "queries": directory / "queries.jsonl",
        "qrels": directory / "qrels.tsv",
    }
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for p in corpus:
            record = {"_id": p.id, "text": p.text}
            if p.title is not None:
                record["title"] = p.title
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(paths["queries"], "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps({"_id": q.id, "text": q.text}, ensure_ascii=False) + "\n")
    with open(paths["qrels"], "w", encoding="utf-8") as fh:
        fh.write("query-id\tcorpus-id\tscore\n")
        for r in qrels:
            fh.write(f"{r.query_id}\t{r.passage_id}\t{r.relevance}\n")
    return paths


@pytest.fixture
def dataset_writer():
    return write_dataset
