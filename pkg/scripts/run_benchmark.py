"""Run the full pipeline over a benchmark corpus and print the score table.

Adds the latency percentiles the plain CLI does not surface:

    python3 scripts/run_benchmark.py --root out/bench --jobs 4
"""

from __future__ import annotations

import argparse
import json
import statistics
from pathlib import Path

from triflow.benchmark import run_batch
from triflow.metrics import evaluate, render_csv, render_text
from triflow.orchestrator import PipelineConfig
from triflow.request import load_requests
from triflow.sandbox import load_sandbox


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", required=True, help="corpus directory from make_benchmark.py")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--out", help="write the score report as JSON")
    parser.add_argument("--csv", help="write the per-constraint table as CSV")
    args = parser.parse_args()

    root = Path(args.root)
    dataset = load_sandbox(root / "sandbox")
    requests = load_requests(root / "requests.jsonl")

    pairs = run_batch(dataset, requests, PipelineConfig(seed=args.seed), jobs=args.jobs)
    report = evaluate(pairs)
    print(render_text(report))

    totals = sorted(outcome.timings_ms["total"] for _, outcome in pairs)
    print(
        f"latency ms: median {statistics.median(totals):.2f}, "
        f"p90 {totals[int(len(totals) * 0.9) - 1]:.2f}, max {totals[-1]:.2f}"
    )

    if args.out:
        Path(args.out).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        print(f"wrote report to {args.out}")
    if args.csv:
        Path(args.csv).write_text(render_csv(report))
        print(f"wrote constraint table to {args.csv}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
