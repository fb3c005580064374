"""Unit tests for warm-up adaptation."""

import numpy as np
import pytest

from pgxselect.sampler.adaptation import (
    DualAveraging,
    WelfordVariance,
    WindowedAdaptation,
    adapt,
)


def acceptance_at(step_size: float) -> float:
    """Synthetic acceptance curve crossing 0.8 at step size 1."""
    return float(0.8**step_size)


def metric_update_points(n_warmup: int) -> list[int]:
    adaptation = WindowedAdaptation(2, n_warmup, 0.8, 1.0)
    return [
        i for i in range(n_warmup) if adaptation.update(np.zeros(2), 0.8)
    ]


class TestDualAveraging:
    """Tests for DualAveraging."""

    def test_reaches_target_acceptance(self) -> None:
        dual = DualAveraging(0.8)
        dual.restart(0.01)
        step_size = 0.01
        for _ in range(2000):
            step_size = dual.update(acceptance_at(step_size))
        assert acceptance_at(dual.final_step_size) == pytest.approx(0.8, abs=0.05)

    def test_restart_centers_on_ten_times_step(self) -> None:
        dual = DualAveraging(0.8)
        dual.restart(0.5)
        assert dual.mu == pytest.approx(np.log(5.0))
        assert dual.counter == 0

    def test_acceptance_above_one_is_clipped(self) -> None:
        """Statistics above 1 push the step size up exactly as 1 does."""
        first, second = DualAveraging(0.8), DualAveraging(0.8)
        assert first.update(1.7) == pytest.approx(second.update(1.0))


class TestWelfordVariance:
    """Tests for WelfordVariance."""

    def test_matches_regularized_sample_variance(
        self, rng: np.random.Generator
    ) -> None:
        data = rng.normal(scale=[1.0, 3.0], size=(200, 2))
        welford = WelfordVariance(2)
        for row in data:
            welford.add(row)
        n = 200.0
        expected = (n / (n + 5)) * data.var(axis=0, ddof=1) + 1e-3 * 5 / (n + 5)
        np.testing.assert_allclose(welford.regularized_variance(), expected, rtol=1e-10)
        np.testing.assert_allclose(welford.mean, data.mean(axis=0), rtol=1e-10)

    def test_restart_forgets(self, rng: np.random.Generator) -> None:
        welford = WelfordVariance(3)
        welford.add(rng.normal(size=3))
        welford.restart()
        assert welford.n == 0
        np.testing.assert_array_equal(welford.mean, np.zeros(3))


class TestWindowedAdaptation:
    """Tests for the warm-up window schedule."""

    def test_default_schedule_doubles_windows(self) -> None:
        """75 + 25, 50, 100, 200, then the slow window stretched to the end."""
        assert metric_update_points(1000) == [99, 149, 249, 449, 949]

    def test_short_warmup_uses_one_window(self) -> None:
        """15% / 75% / 10% split of 100 iterations."""
        assert metric_update_points(100) == [89]

    def test_very_short_warmup_adapts_step_size_only(self) -> None:
        assert metric_update_points(10) == []
        adaptation = WindowedAdaptation(2, 10, 0.8, 1.0)
        for _ in range(10):
            adaptation.update(np.ones(2), 0.8)
        np.testing.assert_array_equal(adaptation.inv_mass_diag, np.ones(2))

    def test_metric_learns_coordinate_scales(self, rng: np.random.Generator) -> None:
        positions = rng.normal(scale=[0.5, 2.0], size=(1000, 2))
        step_size, inv_mass = adapt(positions, np.full(1000, 0.8))
        np.testing.assert_allclose(inv_mass, [0.25, 4.0], rtol=0.2)
        assert step_size > 0

    def test_adapt_requires_matching_lengths(self) -> None:
        with pytest.raises(ValueError):
            adapt([np.zeros(2)] * 3, [0.8, 0.8])
        with pytest.raises(ValueError):
            adapt([], [])
