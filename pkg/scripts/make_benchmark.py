"""Build a reproducible benchmark corpus: one sandbox, one request batch.

Defaults match the configuration the test suite locks, so a fresh checkout
can regenerate the exact corpus the headline numbers come from:

    python3 scripts/make_benchmark.py --root out/bench
"""

from __future__ import annotations

import argparse
from pathlib import Path

from triflow.benchmark import synthesize_requests, write_requests
from triflow.sandbox import GeneratorParams, generate_synthetic, write_sandbox


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", required=True, help="output directory for the corpus")
    parser.add_argument("--cities", type=int, default=5)
    parser.add_argument("--sandbox-seed", type=int, default=1207)
    parser.add_argument("--request-seed", type=int, default=17)
    parser.add_argument("--count", type=int, default=100, help="number of requests")
    args = parser.parse_args()

    root = Path(args.root)
    sandbox_dir = root / "sandbox"
    sandbox_dir.mkdir(parents=True, exist_ok=True)

    dataset = generate_synthetic(args.sandbox_seed, GeneratorParams(n_cities=args.cities))
    write_sandbox(dataset, sandbox_dir)
    print(
        f"wrote sandbox to {sandbox_dir}: {len(dataset.cities)} cities, "
        f"{len(dataset.flights)} flights, {len(dataset.restaurants)} restaurants"
    )

    requests = synthesize_requests(dataset, args.count, seed=args.request_seed)
    requests_path = root / "requests.jsonl"
    write_requests(requests, requests_path)
    print(f"wrote {len(requests)} requests to {requests_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
