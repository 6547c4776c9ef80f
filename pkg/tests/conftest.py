from __future__ import annotations

from datetime import date

import pytest

from triflow.benchmark import run_batch, synthesize_requests, write_requests
from triflow.metrics import evaluate
from triflow.orchestrator import PipelineConfig
from triflow.sandbox import (
    Accommodation,
    Attraction,
    City,
    DistanceEntry,
    Flight,
    GeneratorParams,
    Restaurant,
    SandboxDataset,
    generate_synthetic,
    write_sandbox,
)

BENCH_SANDBOX_SEED = 1207
BENCH_REQUEST_SEED = 17
BENCH_N_INSTANCES = 100

MICRO_DATES = (date(2026, 5, 1), date(2026, 5, 2), date(2026, 5, 3))


def build_micro_dataset() -> SandboxDataset:
    """Two cities, a handful of options per slot class. Small enough that
    tests can enumerate every plan shape over it."""
    d0, d1, d2 = MICRO_DATES
    return SandboxDataset(
        cities=(
            City("Alpha", 40.0, -100.0),
            City("Beta", 40.0, -99.0),
        ),
        flights=(
            Flight("F1", "Alpha", "Beta", d0, 480, 550, False, 8000),
            Flight("F2", "Beta", "Alpha", d2, 600, 670, False, 9000),
            Flight("F3", "Beta", "Alpha", d0, 700, 770, False, 7000),
            Flight("F4", "Alpha", "Beta", d1, 1380, 120, True, 6000),
        ),
        accommodations=(
            Accommodation("Harbor House", "Beta", 20000, "entire_room", frozenset({"no_smoking"}), 1, 2),
            Accommodation("Quiet Rooms", "Beta", 12000, "private_room", frozenset({"no_pets", "no_parties"}), 2, 4),
            Accommodation("Alpha Lodge", "Alpha", 15000, "entire_room", frozenset(), 1, 3),
        ),
        restaurants=(
            Restaurant("Bella Notte", "Beta", 3000, frozenset({"italian"})),
            Restaurant("Sakura Garden", "Beta", 2500, frozenset({"japanese"})),
            Restaurant("Casa Verde", "Beta", 2000, frozenset({"mexican"})),
            Restaurant("Alpha Diner", "Alpha", 1500, frozenset({"american"})),
            Restaurant("Beta Bistro", "Beta", 1800, frozenset({"french"})),
            Restaurant("Golden Wok", "Beta", 2200, frozenset({"chinese"})),
            Restaurant("Spice Route", "Beta", 2600, frozenset({"indian"})),
            Restaurant("Morning Perch", "Beta", 1200, frozenset({"cafe"})),
            Restaurant("Stone Oven", "Beta", 2100, frozenset({"italian", "pizza"})),
        ),
        attractions=(
            Attraction("Beta Museum", "Beta", 40.0, -99.0),
            Attraction("Beta Tower", "Beta", 40.01, -99.01),
            Attraction("Alpha Park", "Alpha", 40.0, -100.0),
            Attraction("Beta Gardens", "Beta", 40.02, -99.02),
        ),
        distances=(
            DistanceEntry("Alpha", "Beta", 100.0, 95.0, 10000, 5000),
            DistanceEntry("Beta", "Alpha", 100.0, 95.0, 10000, 5000),
        ),
    )


@pytest.fixture(scope="session")
def micro_dataset() -> SandboxDataset:
    return build_micro_dataset()


@pytest.fixture(scope="session")
def micro_dir(tmp_path_factory, micro_dataset) -> str:
    root = tmp_path_factory.mktemp("micro_sandbox")
    write_sandbox(micro_dataset, root)
    return str(root)


@pytest.fixture(scope="session")
def bench_dataset() -> SandboxDataset:
    return generate_synthetic(BENCH_SANDBOX_SEED, GeneratorParams(n_cities=5))


@pytest.fixture(scope="session")
def bench_dir(tmp_path_factory, bench_dataset) -> str:
    root = tmp_path_factory.mktemp("bench_sandbox")
    write_sandbox(bench_dataset, root)
    return str(root)


@pytest.fixture(scope="session")
def bench_requests(bench_dataset):
    return synthesize_requests(bench_dataset, BENCH_N_INSTANCES, seed=BENCH_REQUEST_SEED)


@pytest.fixture(scope="session")
def bench_requests_file(tmp_path_factory, bench_requests) -> str:
    path = tmp_path_factory.mktemp("bench_batch") / "requests.jsonl"
    write_requests(bench_requests, path)
    return str(path)


@pytest.fixture(scope="session")
def bench_pairs(bench_dataset, bench_requests):
    return run_batch(bench_dataset, bench_requests, PipelineConfig())


@pytest.fixture(scope="session")
def bench_report(bench_pairs):
    return evaluate(bench_pairs)
