"""Unit test configuration and shared fixtures."""

import logging
from collections.abc import Generator

import jax.numpy as jnp
import numpy as np
import pytest

from pgxselect.config import get_settings
from pgxselect.sampler.runner import DensityTarget
from pgxselect.schemas.dataset_schema import Dataset
from pgxselect.schemas.run_schema import SimulationConfig, TruthLabels
from pgxselect.simulate import generate_dataset
from pgxselect.streams import substream


def standard_normal_log_density(x: jnp.ndarray) -> jnp.ndarray:
    """Module-level so targets built from it pickle into worker processes."""
    return -0.5 * jnp.sum(x**2)


@pytest.fixture(autouse=True)
def clear_settings_cache() -> Generator[None, None, None]:
    """Drop cached settings so environment overrides apply per test."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_config() -> SimulationConfig:
    """A cohort small enough for fast posterior evaluations."""
    return SimulationConfig(n_subjects=24, n_snps=6, causal_effect=-0.2)


@pytest.fixture
def small_study(small_config: SimulationConfig) -> tuple[Dataset, TruthLabels]:
    """One H1 replicate on a fixed stream."""
    return generate_dataset("h1", small_config, substream(11, 0))


@pytest.fixture
def small_dataset(small_study: tuple[Dataset, TruthLabels]) -> Dataset:
    return small_study[0]


@pytest.fixture
def gaussian_target() -> DensityTarget:
    """Three-dimensional standard normal target."""
    return DensityTarget(standard_normal_log_density, 3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240101)


@pytest.fixture
def restore_root_logger() -> Generator[None, None, None]:
    """Undo the handler and level changes made by setup_logging."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
