"""Integration test configuration and shared fixtures."""

import logging
from collections.abc import Generator

import pytest

from pgxselect.config import get_settings


@pytest.fixture(autouse=True)
def isolate_process_state() -> Generator[None, None, None]:
    """Fresh settings per test; root logging restored afterwards."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
    root.handlers[:] = handlers
    root.setLevel(level)
