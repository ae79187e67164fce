"""Tests for counter-based streams and shard fan-out."""

import math

import numpy as np
import pytest

from thermolim.services.sampling import (
    STREAM_ENERGY,
    STREAM_VOLUME,
    generator,
    integrate_over_box,
    map_ordered,
    mean_and_stderr,
    plan_shards,
    sample_mean,
    set_thread_cap,
    worker_count,
)


class TestGenerator:
    """Tests for generator keyed by (seed, stream, ...)."""

    def test_same_keys_same_stream(self):
        """Identical keys reproduce identical draws."""
        a = generator(7, STREAM_VOLUME, 3).random(5)
        b = generator(7, STREAM_VOLUME, 3).random(5)
        np.testing.assert_array_equal(a, b)

    def test_different_streams_differ(self):
        """Different stream ids give different draws."""
        a = generator(7, STREAM_VOLUME).random(5)
        b = generator(7, STREAM_ENERGY).random(5)
        assert not np.array_equal(a, b)

    def test_negative_seed_rejected(self):
        """Negative seeds and keys are rejected."""
        with pytest.raises(ValueError):
            generator(-1)
        with pytest.raises(ValueError):
            generator(1, -2)


class TestPlanShards:
    """Tests for plan_shards."""

    def test_layout_covers_samples(self):
        """Shards are contiguous and cover every sample once."""
        shards = plan_shards(1000, shard_size=300)
        assert [s.size for s in shards] == [300, 300, 300, 100]
        assert [s.start for s in shards] == [0, 300, 600, 900]
        assert [s.index for s in shards] == [0, 1, 2, 3]

    def test_zero_samples_rejected(self):
        """A budget must hold at least one sample."""
        with pytest.raises(ValueError):
            plan_shards(0)


class TestThreadCap:
    """Tests for worker caps."""

    def test_cap_overrides_settings(self):
        """set_thread_cap wins over THERMOLIM_THREADS."""
        set_thread_cap(3)
        assert worker_count() == 3
        set_thread_cap(None)
        assert worker_count() == 1

    def test_invalid_cap(self):
        """Caps below one are rejected."""
        with pytest.raises(ValueError):
            set_thread_cap(0)

    def test_map_ordered_keeps_order(self):
        """Results come back in input order on a pool."""
        set_thread_cap(4)
        assert map_ordered(lambda x: x * x, range(20)) == [x * x for x in range(20)]


class TestSampleMean:
    """Tests for sharded Monte Carlo means."""

    def test_uniform_mean(self):
        """The mean of U(0, 1) is 1/2 within three standard errors."""
        mean, stderr = sample_mean(lambda rng, n: rng.random(n), 100_000, 1, STREAM_VOLUME)
        assert abs(mean - 0.5) <= 3 * stderr
        assert stderr == pytest.approx(math.sqrt(1 / 12 / 100_000), rel=0.05)

    def test_independent_of_thread_count(self, monkeypatch: pytest.MonkeyPatch):
        """Results are bit-identical for any number of workers."""
        monkeypatch.setenv("THERMOLIM_SHARD_SIZE", "1000")
        from thermolim.config import get_settings

        get_settings.cache_clear()

        def draw(rng: np.random.Generator, n: int) -> np.ndarray:
            return rng.standard_normal(n)

        set_thread_cap(1)
        single = sample_mean(draw, 10_500, 3, STREAM_ENERGY)
        set_thread_cap(4)
        pooled = sample_mean(draw, 10_500, 3, STREAM_ENERGY)
        assert single == pooled

    def test_constant_has_zero_stderr(self):
        """A constant variable has zero standard error."""
        mean, stderr = sample_mean(lambda rng, n: np.full(n, 2.5), 5000, 1)
        assert mean == 2.5
        assert stderr == 0.0


class TestIntegrateOverBox:
    """Tests for integrate_over_box."""

    def test_box_volume(self):
        """Integrating one over a box gives its volume exactly."""
        value, stderr = integrate_over_box(
            lambda p: np.ones(len(p)), np.zeros(3), np.array([1.0, 2.0, 3.0]), 1000, 1
        )
        assert value == pytest.approx(6.0)
        assert stderr == 0.0

    def test_linear_integrand(self):
        """The integral of x over [0, 1]^3 is 1/2."""
        value, stderr = integrate_over_box(lambda p: p[:, 0], np.zeros(3), np.ones(3), 50_000, 2)
        assert abs(value - 0.5) <= 3 * stderr


class TestMeanAndStderr:
    """Tests for mean_and_stderr."""

    def test_empty_and_single(self):
        """Fewer than two values carry zero stderr."""
        assert mean_and_stderr([]) == (0.0, 0.0)
        assert mean_and_stderr([4.0]) == (4.0, 0.0)

    def test_known_values(self):
        """Mean and standard error of a small sample."""
        mean, stderr = mean_and_stderr([1.0, 2.0, 3.0, 4.0])
        assert mean == 2.5
        assert stderr == pytest.approx(math.sqrt(5 / 3 / 4))
