"""
Global test configuration and fixtures.
"""

import os
from typing import Generator

import numpy as np
import pytest
from click.testing import CliRunner

# Test environment setup
os.environ.update({
    "ENVIRONMENT": "test",
    "LOG_LEVEL": "WARNING",
    "LOG_FORMAT": "console",
    "REPORT_SAMPLE_SIZE": "60",
})

# Import after environment setup
from src.config.settings import settings  # noqa: E402
from src.services.autmap import from_combinatorial_iso, identity_map  # noqa: E402
from src.services.pwl import generators  # noqa: E402
from src.services.serialization import (  # noqa: E402
    function_to_payload,
    iso_to_payload,
    map_to_payload,
)
from tests.fixtures.sample_data import SampleDataGenerator, write_payload  # noqa: E402


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "unit: Unit tests")
    config.addinivalue_line("markers", "integration: Integration tests")
    config.addinivalue_line("markers", "e2e: End-to-end tests")
    config.addinivalue_line("markers", "performance: Performance tests")
    config.addinivalue_line("markers", "security: Security tests")


@pytest.fixture(scope="session")
def sample_data() -> SampleDataGenerator:
    return SampleDataGenerator()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator so random suites are reproducible."""
    return np.random.default_rng(20240601)


# Generator fixtures
@pytest.fixture(scope="session")
def gens2():
    return generators(2)


@pytest.fixture(scope="session")
def gens3():
    return generators(3)


# Map fixtures
@pytest.fixture(scope="session")
def identity2():
    return identity_map(2)


@pytest.fixture(scope="session")
def farey(sample_data):
    """(map, certificate) of the three-piece map 0,1/2,2/3,1 -> 0,1/3,1/2,1."""
    return from_combinatorial_iso(sample_data.farey_iso())


@pytest.fixture(scope="session")
def farey_map(farey):
    return farey[0]


@pytest.fixture(scope="session")
def square(sample_data):
    """(map, certificate) of the six-triangle automorphism of the square."""
    return from_combinatorial_iso(sample_data.square_iso())


@pytest.fixture(scope="session")
def square_map(square):
    return square[0]


# CLI fixtures
@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def payload_dir(tmp_path, sample_data, farey) -> Generator:
    """Directory holding iso, map and function payloads for the CLI."""
    map, cert = farey
    write_payload(tmp_path, "farey_iso.json", iso_to_payload(sample_data.farey_iso()))
    write_payload(tmp_path, "square_iso.json", iso_to_payload(sample_data.square_iso()))
    write_payload(tmp_path, "farey_map.json", map_to_payload(map, cert))
    write_payload(tmp_path, "farey_map_bare.json", map_to_payload(map))
    write_payload(tmp_path, "unit.json", function_to_payload(generators(2).unit))
    write_payload(tmp_path, "x1.json", function_to_payload(generators(2).x(1)))
    write_payload(tmp_path, "tent.json", function_to_payload(sample_data.tent_unit()))
    write_payload(tmp_path, "identity_map.json", map_to_payload(identity_map(2)))
    yield tmp_path


@pytest.fixture
def test_settings():
    return settings
