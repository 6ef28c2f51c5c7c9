#!/usr/bin/env python3
"""Generate the 10-query / 100-passage metric parity fixture.

Writes a TREC run plus graded qrels covering the interesting edge cases:
graded relevance 0..3, a query with zero relevant judgments, a run query
absent from the qrels, and relevant passages missing from the run. Run once;
outputs are committed under tests/data and then frozen by the golden file
produced with reference_metrics.py.
"""

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data"
RUN_DEPTH = 50


def main():
    rng = random.Random(20240611)
    passages = [f"p{i:03d}" for i in range(100)]
    queries = [f"q{i:02d}" for i in range(10)]

    qrel_lines = ["query-id\tcorpus-id\tscore"]
    run_lines = []
    for qi, qid in enumerate(queries):
        judged = rng.sample(passages, rng.randint(4, 9))
        if qid == "q07":
            grades = [0] * len(judged)  # zero relevant: excluded from averages
        else:
            grades = [rng.choice([0, 1, 1, 2, 3]) for _ in judged]
            if not any(grades):
                grades[0] = 1
        for pid, rel in zip(judged, grades):
            qrel_lines.append(f"{qid}\t{pid}\t{rel}")

        pool = rng.sample(passages, RUN_DEPTH)
        # bias: pull roughly half of the relevant passages into the ranking pool
        for pid, rel in zip(judged, grades):
            if rel > 0 and pid not in pool and rng.random() < 0.5:
                pool[rng.randrange(len(pool))] = pid
        pool = list(dict.fromkeys(pool))
        grade_of = dict(zip(judged, grades))
        # relevance only loosely correlates with score so ranks of the first
        # relevant document vary across queries (some outside the top 10)
        scored = sorted(
            ((rng.random() + (rng.choice([0.0, 0.1, 0.5]) if grade_of.get(pid, 0) > 0 else 0.0), pid)
             for pid in pool),
            key=lambda t: (-t[0], t[1]),
        )
        for rank, (score, pid) in enumerate(scored, start=1):
            run_lines.append(f"{qid} Q0 {pid} {rank} {score:.6f} fixture")

    # a run-only query with no judgments at all: must be skipped everywhere
    extra_pool = rng.sample(passages, 10)
    for rank, pid in enumerate(extra_pool, start=1):
        run_lines.append(f"q99 Q0 {pid} {rank} {1.0 / rank:.6f} fixture")

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "metric_fixture_qrels.tsv").write_text("\n".join(qrel_lines) + "\n")
    (OUT / "metric_fixture_run.trec").write_text("\n".join(run_lines) + "\n")
    print(f"wrote fixture to {OUT}")


if __name__ == "__main__":
    main()
