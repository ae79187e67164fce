"""Counter-based random streams and deterministic shard fan-out.

Every Monte Carlo loop in the laboratory draws from a Philox generator keyed by
``(seed, stream, *keys, shard)``. The shard layout depends only on the sample
count and ``Settings.shard_size``, so results do not change with the number of
worker threads; partial sums are reduced in shard order.
"""

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

import numpy as np
from numpy.typing import NDArray

from ..config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Stream identifiers keep independent purposes on disjoint key spaces
STREAM_VOLUME = 0
STREAM_SAUSAGE = 1
STREAM_ROTATION = 2
STREAM_TRANSLATION = 3
STREAM_ENERGY = 4
STREAM_SSA = 5
STREAM_FRAME = 6
STREAM_SUBSET = 7

# Set by the CLI from --threads; None falls back to THERMOLIM_THREADS
_thread_cap: int | None = None


def set_thread_cap(threads: int | None) -> None:
    """Cap the worker count for shard fan-out (None restores the settings value)."""
    global _thread_cap
    if threads is not None and threads < 1:
        raise ValueError(f"thread cap must be at least 1, got {threads}")
    _thread_cap = threads


def worker_count() -> int:
    """Number of worker threads currently allowed."""
    return _thread_cap if _thread_cap is not None else get_settings().threads


def generator(seed: int, *keys: int) -> np.random.Generator:
    """
    Build the counter-based generator for one stream position.

    Args:
        seed: Experiment seed (non-negative)
        keys: Stream, work item and shard identifiers

    Returns:
        A Philox-backed generator, identical for identical arguments
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError(f"seed and stream keys must be non-negative, got {seed}, {keys}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *keys])))


@dataclass(frozen=True)
class Shard:
    """Contiguous block of samples drawn from one generator."""

    index: int
    start: int
    size: int


def plan_shards(samples: int, shard_size: int | None = None) -> list[Shard]:
    """Split a sample budget into fixed-size shards."""
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    size = shard_size or get_settings().shard_size
    return [
        Shard(index=i, start=start, size=min(size, samples - start))
        for i, start in enumerate(range(0, samples, size))
    ]


def map_ordered(fn: Callable[[T], R], items: Sequence[T] | Iterable[T]) -> list[R]:
    """Apply fn to every item on the worker pool, returning results in input order."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sample_mean(
    draw: Callable[[np.random.Generator, int], NDArray[np.float64]],
    samples: int,
    seed: int,
    *keys: int,
) -> tuple[float, float]:
    """
    Sharded Monte Carlo mean of a random variable.

    Args:
        draw: Given a generator and a count n, returns n independent values
        samples: Total number of values
        seed: Experiment seed
        keys: Stream identifiers

    Returns:
        (mean, stderr) with stderr the sample standard deviation over sqrt(samples)
    """

    def run_shard(shard: Shard) -> tuple[float, float]:
        values = np.asarray(draw(generator(seed, *keys, shard.index), shard.size), dtype=float)
        return math.fsum(values), math.fsum(values * values)

    partials = map_ordered(run_shard, plan_shards(samples))
    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)

    mean = total / samples
    if samples > 1:
        variance = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
    else:
        variance = 0.0
    return mean, math.sqrt(variance / samples)


def integrate_over_box(
    integrand: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    lo: NDArray[np.float64],
    hi: NDArray[np.float64],
    samples: int,
    seed: int,
    *keys: int,
) -> tuple[float, float]:
    """
    Plain Monte Carlo integral of a vectorized integrand over an axis-aligned box.

    Args:
        integrand: Maps an (n, 3) point array to n values
        lo: Lower box corner
        hi: Upper box corner
        samples: Total number of uniform points
        seed: Experiment seed
        keys: Stream identifiers

    Returns:
        (estimate, stderr) where stderr is the sample standard deviation of the
        integrand times the box volume over sqrt(samples)
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    box_volume = float(np.prod(hi - lo))

    def draw(rng: np.random.Generator, n: int) -> NDArray[np.float64]:
        return np.asarray(integrand(lo + (hi - lo) * rng.random((n, 3))), dtype=float)

    mean, stderr = sample_mean(draw, samples, seed, *keys)
    return box_volume * mean, box_volume * stderr


def mean_and_stderr(values: Sequence[float] | NDArray[np.float64]) -> tuple[float, float]:
    """Sample mean and its standard error (zero for fewer than two values)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return 0.0, 0.0
    mean = math.fsum(arr) / arr.size
    if arr.size < 2:
        return mean, 0.0
    return mean, float(np.std(arr, ddof=1) / math.sqrt(arr.size))
