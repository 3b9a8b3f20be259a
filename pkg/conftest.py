"""
Pytest Configuration and Fixtures for the big-bang regularization toolkit
Provides parameter and model factories, integrator options and soft assertions.
"""

import json
import os
from pathlib import Path
from typing import Any, Callable, Dict

import pytest

from bigbang.cosmo import CosmologyParams, ReducedModel, pure_power_model, reduce
from bigbang.flow import IntegratorOptions
from utils.data_manager import DataManager, get_data_manager
from utils.data_validator import SchemaManager
from utils.logger import get_logger
from utils.soft_assertions import create_soft_assertions


# Global logger
logger = get_logger("conftest")


def pytest_addoption(parser):
    """Add custom command line options for pytest."""
    parser.addoption(
        "--skip-slow",
        action="store_true",
        default=False,
        help="Skip tests marked slow (long integrations and the full verify suite)"
    )


def pytest_configure(config):
    """Create directories used by file logging."""
    os.makedirs("logs", exist_ok=True)


def pytest_runtest_setup(item):
    """Setup hook for each test - slow-test filtering."""
    if item.get_closest_marker("slow") and item.config.getoption("--skip-slow"):
        pytest.skip("Slow test skipped (--skip-slow)")


@pytest.fixture(scope="session")
def data_manager() -> DataManager:
    """
    Provide DataManager instance for parameter files

    Returns:
        DataManager: Configured data manager instance
    """
    return get_data_manager()


@pytest.fixture(scope="session")
def schema_manager() -> SchemaManager:
    """
    Provide SchemaManager instance for schema-based validation

    Returns:
        SchemaManager: Schema manager instance
    """
    return SchemaManager()


@pytest.fixture(scope="session")
def default_params(data_manager) -> CosmologyParams:
    """Shipped defaults: 4 pi G / 3 = 1, sigma = 1, K = 0, unit densities, w = 2."""
    return data_manager.load_params()


@pytest.fixture
def model_factory(default_params) -> Callable[..., ReducedModel]:
    """w (and optional parameter overrides) -> reduced full model."""
    def make(w: Any, **overrides: Any) -> ReducedModel:
        return reduce(default_params.with_overrides(w=w, **overrides))
    return make


@pytest.fixture
def pure_power_factory() -> Callable[[Any], ReducedModel]:
    return pure_power_model


@pytest.fixture
def integrator_options() -> IntegratorOptions:
    return IntegratorOptions.from_config()


@pytest.fixture
def tight_options() -> IntegratorOptions:
    return IntegratorOptions.from_config(rel_tol=1e-13, abs_tol=1e-15)


@pytest.fixture(scope="function")
def soft_assert(request):
    """Provide soft assertions for tests."""
    test_name = request.node.name
    soft_assertions = create_soft_assertions(test_name)

    yield soft_assertions

    # Verify all soft assertions at the end of the test
    try:
        soft_assertions.assert_all(raise_exception=True)
    except Exception:
        # Log summary even if assertions fail
        soft_assertions.log_summary()
        raise


@pytest.fixture
def tmp_output_dir(tmp_path) -> Path:
    path = tmp_path / "output"
    path.mkdir()
    return path


@pytest.fixture
def write_params(tmp_path, default_params) -> Callable[..., Path]:
    """Write a parameter file from the defaults plus overrides; returns its path."""
    def write(name: str = "params.json", **overrides: Any) -> Path:
        data: Dict[str, Any] = default_params.to_dict()
        data.update(overrides)
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path
    return write
