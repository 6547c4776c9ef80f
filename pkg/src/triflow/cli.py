"""Command-line front end.

Exit codes are part of the contract: 0 for success, 1 for malformed input
(bad CSV, bad request or config JSON, unresolvable cities, bad generator
parameters), 2 for I/O trouble (missing paths, unwritable outputs).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import date

from .benchmark import run_batch, synthesize_requests, write_requests
from .errors import (
    CityResolutionError,
    ReferentialIntegrityError,
    RequestValidationError,
    SandboxIntegrityError,
    SandboxParseError,
)
from .governance import build_system_report
from .metrics import evaluate, render_csv, render_text, summary_line
from .orchestrator import PipelineConfig, load_config, run_pipeline
from .planner import itinerary_to_json
from .request import load_requests, request_from_json
from .sandbox import GeneratorParams, generate_synthetic, load_sandbox, write_sandbox

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_IO = 2

_INPUT_ERRORS = (
    SandboxParseError,
    ReferentialIntegrityError,
    SandboxIntegrityError,
    RequestValidationError,
    CityResolutionError,
)


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _write_json(path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def _config_from_args(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "agent", None):
        config = replace(config, agent_backend=args.agent)
    return config


def cmd_plan(args) -> int:
    try:
        d = load_sandbox(args.sandbox)
        with open(args.request, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except _INPUT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    except json.JSONDecodeError as exc:
        _say(f"error: {args.request}: invalid JSON: {exc}")
        return EXIT_BAD_INPUT
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    try:
        r = request_from_json(obj)
        config = _config_from_args(args)
        outcome = run_pipeline(r, d, config)
    except _INPUT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    q, it, s = outcome.query, outcome.itinerary, outcome.subset
    report = build_system_report(it, q, s, d)
    report_path = args.report or f"{args.out}.report.json"
    try:
        _write_json(args.out, itinerary_to_json(it))
        _write_json(report_path, report.to_json())
        if args.trace:
            _write_json(args.trace, outcome.trace.to_json())
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    failing = outcome.final_report.n_failing
    print(
        f"delivered {q.days}-day plan, {failing} failing check(s),"
        f" cost {report.cost.total / 100:.2f} of budget {q.budget / 100:.2f} -> {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        d = load_sandbox(args.sandbox)
        requests = load_requests(args.requests)
    except _INPUT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    try:
        config = _config_from_args(args)
        pairs = run_batch(d, requests, config, jobs=args.jobs)
        report = evaluate(pairs)
    except _INPUT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    except ValueError as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT

    try:
        _write_json(args.out, report.to_json())
        if args.csv:
            _write_text(args.csv, render_csv(report))
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    if args.verbose:
        print(render_text(report), end="")
    else:
        print(summary_line(report))
    return EXIT_OK


def cmd_gen_sandbox(args) -> int:
    try:
        params = GeneratorParams(
            n_cities=args.cities,
            n_flights_per_pair=args.flights_per_pair,
            n_accommodations_per_city=args.accommodations_per_city,
            n_restaurants_per_city=args.restaurants_per_city,
            n_attractions_per_city=args.attractions_per_city,
            start_date=date.fromisoformat(args.start_date),
            n_days=args.days,
        )
        dataset = generate_synthetic(args.seed, params)
    except ValueError as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT

    try:
        write_sandbox(dataset, args.out)
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO

    print(
        f"wrote sandbox to {args.out}: {len(dataset.cities)} cities,"
        f" {len(dataset.flights)} flights, {len(dataset.accommodations)} accommodations,"
        f" {len(dataset.restaurants)} restaurants, {len(dataset.attractions)} attractions"
    )
    return EXIT_OK


def cmd_gen_requests(args) -> int:
    try:
        d = load_sandbox(args.sandbox)
    except _INPUT_ERRORS as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO
    try:
        requests = synthesize_requests(d, args.count, seed=args.seed)
    except ValueError as exc:
        _say(f"error: {exc}")
        return EXIT_BAD_INPUT
    try:
        write_requests(requests, args.out)
    except OSError as exc:
        _say(f"error: {exc}")
        return EXIT_IO
    print(f"wrote {len(requests)} requests to {args.out}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for I/O here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triflow", description="feasibility-first trip planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[], help="plan one request")
    p.add_argument("--sandbox", required=True, help="sandbox CSV directory")
    p.add_argument("--request", required=True, help="request JSON file")
    p.add_argument("--out", required=True, help="itinerary JSON output path")
    p.add_argument("--report", default=None, help="constraint report path (default <out>.report.json)")
    p.add_argument("--trace", default=None, help="write the repair trace JSON here")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--agent", choices=("mock", "remote"), default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="run a request batch and score it")
    p.add_argument("--sandbox", required=True)
    p.add_argument("--requests", required=True, help="JSON-lines batch file")
    p.add_argument("--out", required=True, help="benchmark report JSON output path")
    p.add_argument("--csv", default=None, help="also write the per-constraint table as CSV")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; output bytes do not depend on this")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--agent", choices=("mock", "remote"), default=None)
    p.add_argument("--verbose", action="store_true", help="print the full table instead of one line")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen-sandbox", help="write a synthetic sandbox")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cities", type=int, default=GeneratorParams.n_cities)
    p.add_argument("--flights-per-pair", type=int, default=GeneratorParams.n_flights_per_pair)
    p.add_argument("--accommodations-per-city", type=int, default=GeneratorParams.n_accommodations_per_city)
    p.add_argument("--restaurants-per-city", type=int, default=GeneratorParams.n_restaurants_per_city)
    p.add_argument("--attractions-per-city", type=int, default=GeneratorParams.n_attractions_per_city)
    p.add_argument("--start-date", default=GeneratorParams.start_date.isoformat())
    p.add_argument("--days", type=int, default=GeneratorParams.n_days)
    p.set_defaults(func=cmd_gen_sandbox)

    p = sub.add_parser("gen-requests", help="write a synthetic request batch")
    p.add_argument("--sandbox", required=True)
    p.add_argument("--out", required=True, help="JSON-lines output path")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_requests)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
