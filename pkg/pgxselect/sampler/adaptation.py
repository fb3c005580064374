"""Warm-up adaptation: dual-averaging step size and windowed diagonal metric."""

import math
from collections.abc import Iterable

import numpy as np
from numpy.typing import NDArray

INIT_BUFFER = 75
TERM_BUFFER = 50
BASE_WINDOW = 25


class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance."""

    def __init__(
        self,
        target_accept: float,
        gamma: float = 0.05,
        t0: float = 10.0,
        kappa: float = 0.75,
    ):
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.restart(1.0)

    def restart(self, step_size: float) -> None:
        self.mu = math.log(10.0 * step_size)
        self.counter = 0
        self.s_bar = 0.0
        self.x_bar = 0.0

    def update(self, accept_stat: float) -> float:
        """Feed one acceptance statistic; returns the next step size."""
        self.counter += 1
        accept = min(1.0, accept_stat)
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target_accept - accept)
        x = self.mu - self.s_bar * math.sqrt(self.counter) / self.gamma
        x_eta = self.counter ** (-self.kappa)
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x
        return math.exp(x)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.x_bar)


class WelfordVariance:
    """Streaming per-coordinate variance."""

    def __init__(self, dim: int):
        self.dim = dim
        self.restart()

    def restart(self) -> None:
        self.n = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)

    def add(self, x: NDArray[np.float64]) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> NDArray[np.float64]:
        """Sample variance shrunk toward 1e-3 with weight 5 / (n + 5)."""
        n = float(self.n)
        variance = self.m2 / max(n - 1.0, 1.0)
        return (n / (n + 5.0)) * variance + 1e-3 * (5.0 / (n + 5.0))


class WindowedAdaptation:
    """Step size and diagonal inverse metric learned over expanding windows.

    Warm-up is split into an initial fast buffer (step size only), a series
    of doubling slow windows that each end with a metric update, and a
    terminal fast buffer. Short warm-ups use 15% / 75% / 10% splits.
    """

    def __init__(
        self,
        dim: int,
        n_warmup: int,
        target_accept: float,
        initial_step_size: float,
    ):
        self.n_warmup = n_warmup
        self.inv_mass_diag = np.ones(dim)
        self.step_size = initial_step_size
        self.dual = DualAveraging(target_accept)
        self.dual.restart(initial_step_size)
        self.variance = WelfordVariance(dim)

        init_buffer, term_buffer, base_window = INIT_BUFFER, TERM_BUFFER, BASE_WINDOW
        if n_warmup < 20:
            # step size only
            init_buffer, term_buffer, base_window = n_warmup, 0, 0
        elif init_buffer + term_buffer + base_window > n_warmup:
            init_buffer = int(0.15 * n_warmup)
            term_buffer = int(0.1 * n_warmup)
            base_window = n_warmup - (init_buffer + term_buffer)
        self.init_buffer = init_buffer
        self.term_buffer = term_buffer
        self.window_size = base_window
        self.next_window_end = init_buffer + base_window - 1
        self.counter = 0

    def _in_window(self) -> bool:
        return (
            self.init_buffer <= self.counter < self.n_warmup - self.term_buffer
            and self.counter != self.n_warmup
        )

    def _window_ends(self) -> bool:
        return self.counter == self.next_window_end and self.counter != self.n_warmup

    def _advance_window(self) -> None:
        last_end = self.n_warmup - self.term_buffer - 1
        if self.next_window_end == last_end:
            return
        self.window_size *= 2
        self.next_window_end = self.counter + self.window_size
        if self.next_window_end != last_end:
            slow_end = self.n_warmup - self.term_buffer
            if self.next_window_end + 2 * self.window_size >= slow_end:
                self.next_window_end = last_end

    def update(self, position: NDArray[np.float64], accept_stat: float) -> bool:
        """Learn from one warm-up transition.

        Returns:
            True when the metric was just updated; the caller should then
            search for a new initial step size and call ``restart_step_size``.
        """
        self.step_size = self.dual.update(accept_stat)
        updated = False
        if self.window_size > 0:
            if self._in_window():
                self.variance.add(position)
            if self._window_ends():
                self._advance_window()
                self.inv_mass_diag = self.variance.regularized_variance()
                self.variance.restart()
                updated = True
        self.counter += 1
        return updated

    def restart_step_size(self, step_size: float) -> None:
        self.step_size = step_size
        self.dual.restart(step_size)

    @property
    def final_step_size(self) -> float:
        return self.dual.final_step_size


def adapt(
    warmup_positions: Iterable[NDArray[np.float64]],
    accept_stats: Iterable[float],
    target_accept: float = 0.8,
    initial_step_size: float = 1.0,
) -> tuple[float, NDArray[np.float64]]:
    """Replay recorded warm-up transitions through the windowed adaptation.

    Args:
        warmup_positions: Positions after each warm-up transition
        accept_stats: Acceptance statistic of each transition
        target_accept: Dual-averaging target
        initial_step_size: Step size at the start of warm-up

    Returns:
        Final step size and diagonal inverse mass matrix
    """
    positions = [np.asarray(x, dtype=float) for x in warmup_positions]
    stats = list(accept_stats)
    if len(positions) != len(stats):
        raise ValueError("need one acceptance statistic per warm-up position")
    if not positions:
        raise ValueError("no warm-up draws to adapt from")
    adaptation = WindowedAdaptation(
        positions[0].shape[0], len(positions), target_accept, initial_step_size
    )
    for position, accept in zip(positions, stats, strict=True):
        if adaptation.update(position, accept):
            adaptation.restart_step_size(adaptation.step_size)
    return adaptation.final_step_size, adaptation.inv_mass_diag
