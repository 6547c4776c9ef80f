from __future__ import annotations

from dataclasses import replace
from datetime import date
from pathlib import Path

import pytest

from triflow.errors import ReferentialIntegrityError, SandboxParseError
from triflow.sandbox import (
    Accommodation,
    City,
    Flight,
    GeneratorParams,
    SandboxDataset,
    generate_synthetic,
    load_sandbox,
    validate_integrity,
    write_sandbox,
)


def test_generation_is_deterministic():
    assert generate_synthetic(7) == generate_synthetic(7)


def test_generation_diverges_across_seeds():
    assert generate_synthetic(7) != generate_synthetic(8)


def test_generated_dataset_is_clean():
    report = validate_integrity(generate_synthetic(7))
    assert report.is_clean
    assert report.violations == []


def test_roundtrip_through_csv(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    loaded = load_sandbox(tmp_path)
    assert loaded.cities == dataset.cities
    assert loaded.flights == dataset.flights
    assert loaded.accommodations == dataset.accommodations
    assert loaded.restaurants == dataset.restaurants
    assert loaded.attractions == dataset.attractions
    assert loaded.distances == dataset.distances


def test_missing_table_file(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    (tmp_path / "flights.csv").unlink()
    with pytest.raises(FileNotFoundError):
        load_sandbox(tmp_path)


def test_malformed_row_reports_file_and_line(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    path = tmp_path / "flights.csv"
    lines = path.read_text().splitlines()
    lines[3] = lines[3].replace(lines[3].split(",")[7], "not-a-price")
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SandboxParseError, match=r"flights\.csv:4"):
        load_sandbox(tmp_path)


def test_header_mismatch_rejected(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    path = tmp_path / "cities.csv"
    text = path.read_text().replace("latitude", "lat", 1)
    path.write_text(text)
    with pytest.raises(SandboxParseError, match="header"):
        load_sandbox(tmp_path)


def test_duplicate_flight_id_rejected(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    path = tmp_path / "flights.csv"
    lines = path.read_text().splitlines()
    lines.append(lines[1])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(SandboxParseError, match="duplicate"):
        load_sandbox(tmp_path)


def test_unknown_city_reference_rejected(tmp_path):
    dataset = generate_synthetic(7)
    write_sandbox(dataset, tmp_path)
    path = tmp_path / "accommodations.csv"
    lines = path.read_text().splitlines()
    first = lines[1].split(",")
    first[1] = "Atlantis"
    lines[1] = ",".join(first)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ReferentialIntegrityError, match="Atlantis"):
        load_sandbox(tmp_path)


def _with_flights(dataset: SandboxDataset, flights) -> SandboxDataset:
    return SandboxDataset(
        cities=dataset.cities,
        flights=tuple(flights),
        accommodations=dataset.accommodations,
        restaurants=dataset.restaurants,
        attractions=dataset.attractions,
        distances=dataset.distances,
    )


def test_integrity_flags_bad_coordinates():
    dataset = generate_synthetic(7)
    bad_city = replace(dataset.cities[0], latitude=95.0)
    broken = SandboxDataset(
        cities=(bad_city,) + dataset.cities[1:],
        flights=dataset.flights,
        accommodations=dataset.accommodations,
        restaurants=dataset.restaurants,
        attractions=dataset.attractions,
        distances=dataset.distances,
    )
    report = validate_integrity(broken)
    assert not report.is_clean
    assert report.by_category("geometry")


def test_integrity_flags_bad_time_window():
    dataset = generate_synthetic(7)
    bad = replace(dataset.flights[0], depart=1500)
    report = validate_integrity(_with_flights(dataset, (bad,) + dataset.flights[1:]))
    assert report.by_category("time_window")


def test_integrity_flags_overnight_inconsistency():
    dataset = generate_synthetic(7)
    flight = dataset.flights[0]
    bad = replace(flight, depart=600, arrive=300, overnight=False)
    report = validate_integrity(_with_flights(dataset, (bad,) + dataset.flights[1:]))
    assert report.by_category("time_window")


def test_integrity_flags_negative_price():
    dataset = generate_synthetic(7)
    bad = replace(dataset.flights[0], price=-1)
    report = validate_integrity(_with_flights(dataset, (bad,) + dataset.flights[1:]))
    assert report.by_category("price")


def test_generator_rejects_bad_params():
    with pytest.raises(ValueError):
        generate_synthetic(0, GeneratorParams(n_cities=0))
    with pytest.raises(ValueError):
        generate_synthetic(0, GeneratorParams(n_restaurants_per_city=0))


def test_generator_scales_with_params():
    params = GeneratorParams(n_cities=3, n_flights_per_pair=1, n_days=2)
    dataset = generate_synthetic(3, params)
    assert len(dataset.cities) == 3
    # full directed matrix and one flight per ordered pair per day
    assert len(dataset.distances) == 6
    assert len(dataset.flights) == 12


def test_distance_lookup(micro_dataset):
    entry = micro_dataset.distance_between("Alpha", "Beta")
    assert entry is not None and entry.distance_km == 100.0
    assert micro_dataset.distance_between("Alpha", "Nowhere") is None
