"""Pytest configuration and fixtures."""

import os
from collections.abc import Generator

import pytest

# Deterministic settings before anything reads them
os.environ.setdefault("THERMOLIM_SEED", "1")
os.environ.setdefault("THERMOLIM_SAMPLES", "20000")
os.environ.setdefault("THERMOLIM_THREADS", "1")

from thermolim.config import get_settings  # noqa: E402
from thermolim.services.geom import Domain, ball  # noqa: E402
from thermolim.services.models import (  # noqa: E402
    GaussianFreeEnergyModel,
    LatticePairModel,
    LocalFunctionalModel,
    Quality,
)
from thermolim.services.sampling import set_thread_cap  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_settings() -> Generator[None, None, None]:
    """Re-read THERMOLIM_* variables for every test and reset the thread cap."""
    get_settings.cache_clear()
    set_thread_cap(None)
    yield
    get_settings.cache_clear()
    set_thread_cap(None)


@pytest.fixture
def quality() -> Quality:
    """A moderate Monte Carlo budget."""
    return Quality(samples=20_000, seed=1)


@pytest.fixture
def local_sin() -> LocalFunctionalModel:
    return LocalFunctionalModel.sin_squared()


@pytest.fixture
def lattice() -> LatticePairModel:
    """Truncated Yukawa with r_cut = 1: nearest neighbours only."""
    return LatticePairModel()


@pytest.fixture
def gaussian() -> GaussianFreeEnergyModel:
    return GaussianFreeEnergyModel()


@pytest.fixture
def unit_ball() -> Domain:
    return ball(1.0)
