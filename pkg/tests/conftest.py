# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Global fixtures and utilities for integration and unit tests."""
import pytest

DEFAULT_PROPERTY_SEED = 20240611


def pytest_addoption(parser: pytest.Parser) -> None:
    """Define some command line options for integration and unit tests."""
    parser.addoption(
        "--property-seed",
        action="store",
        type=int,
        default=DEFAULT_PROPERTY_SEED,
        help="seed of the generator drawing parameters in property tests",
    )
