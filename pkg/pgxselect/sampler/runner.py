"""Multi-chain NUTS runs: initialization, warm-up, sampling and collection."""

import logging
import math
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from multiprocessing import get_context
from typing import Any, Protocol

import jax
import jax.numpy as jnp
import numpy as np
import pandas as pd
from numpy.typing import NDArray

from pgxselect.exceptions import DimensionError, PgxSelectError
from pgxselect.sampler.adaptation import WindowedAdaptation
from pgxselect.sampler.convergence import summarize
from pgxselect.sampler.nuts import NutsState, find_reasonable_step_size, nuts_draw
from pgxselect.schemas.run_schema import SamplerConfig
from pgxselect.streams import substream
from pgxselect.telemetry import (
    divergence_counter,
    draw_counter,
    init_worker,
    tracer,
)

logger = logging.getLogger(__name__)

MAX_INIT_ATTEMPTS = 100
STAT_NAMES = (
    "accept_stat",
    "step_size",
    "tree_depth",
    "n_leapfrog",
    "divergent",
    "energy",
    "lp",
)


class Target(Protocol):
    """What the sampler needs from a model."""

    @property
    def dim(self) -> int: ...

    def value_and_grad(self, position: Any) -> tuple[float, NDArray[np.float64]]: ...

    def initial_position(self, rng: np.random.Generator) -> NDArray[np.float64]: ...

    def constrained_names(self) -> list[str]: ...

    def constrain_draw(self, position: Any) -> NDArray[np.float64]: ...


class DensityTarget:
    """Target built from a jax-traceable log-density on R^dim.

    Args:
        log_density: Function of a position vector returning a scalar
        dim: Dimension of the position
        names: Parameter names; ``x[0]``, ``x[1]``, ... by default
        constrain: Map from position to reported values, identity by default
        init_radius: Half-width of the uniform initialization box
    """

    def __init__(
        self,
        log_density: Callable[[Any], Any],
        dim: int,
        names: list[str] | None = None,
        constrain: Callable[[Any], Any] | None = None,
        init_radius: float = 2.0,
    ):
        self.log_density = log_density
        self._dim = dim
        self.names = names or [f"x[{i}]" for i in range(dim)]
        self.constrain = constrain
        self.init_radius = init_radius
        self._compiled: Any = None

    @property
    def dim(self) -> int:
        return self._dim

    def value_and_grad(self, position: Any) -> tuple[float, NDArray[np.float64]]:
        if self._compiled is None:
            self._compiled = jax.jit(jax.value_and_grad(self.log_density))
        value, grad = self._compiled(jnp.asarray(position, dtype=jnp.float64))
        value = float(value)
        return (value if not math.isnan(value) else -math.inf), np.asarray(grad)

    def initial_position(self, rng: np.random.Generator) -> NDArray[np.float64]:
        return rng.uniform(-self.init_radius, self.init_radius, size=self._dim)

    def constrained_names(self) -> list[str]:
        return list(self.names)

    def constrain_draw(self, position: Any) -> NDArray[np.float64]:
        if self.constrain is None:
            return np.asarray(position, dtype=float)
        return np.asarray(self.constrain(jnp.asarray(position)), dtype=float)

    def __getstate__(self) -> dict[str, Any]:
        state = self.__dict__.copy()
        state["_compiled"] = None
        return state


@dataclass
class ChainResult:
    """Retained draws and statistics of one chain."""

    chain: int
    draws: NDArray[np.float64]
    stats: dict[str, NDArray[np.float64]]
    step_size: float
    inv_mass_diag: NDArray[np.float64]
    warmup_accept: float
    seconds: float


@dataclass
class PosteriorDraws:
    """Constrained draws of all chains with sampler statistics.

    ``draws`` has shape (chains, samples, parameters) and ``stats`` maps
    each statistic name to a (chains, samples) array.
    """

    names: list[str]
    draws: NDArray[np.float64]
    stats: dict[str, NDArray[np.float64]]
    step_sizes: NDArray[np.float64]
    inv_mass_diags: NDArray[np.float64]
    config: SamplerConfig
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.draws.ndim != 3 or self.draws.shape[2] != len(self.names):
            raise DimensionError(
                f"draws of shape {self.draws.shape} "
                f"do not match {len(self.names)} names"
            )
        self._index = {name: j for j, name in enumerate(self.names)}

    @property
    def n_chains(self) -> int:
        return int(self.draws.shape[0])

    @property
    def n_samples(self) -> int:
        return int(self.draws.shape[1])

    @property
    def n_divergent(self) -> int:
        return int(np.sum(self.stats["divergent"]))

    def column(self, name: str) -> NDArray[np.float64]:
        """(chains, samples) draws of one parameter."""
        return np.asarray(self.draws[:, :, self._index[name]])

    def flat(self, name: str) -> NDArray[np.float64]:
        return self.column(name).reshape(-1)

    def columns_with_prefix(self, prefix: str) -> list[str]:
        return [name for name in self.names if name.startswith(prefix)]

    @property
    def snp_ids(self) -> list[str]:
        return [name[len("beta[") : -1] for name in self.columns_with_prefix("beta[")]

    def beta_draws(self) -> NDArray[np.float64]:
        """Pooled (draws, snps) effect matrix in ``snp_ids`` order."""
        indices = [self._index[name] for name in self.columns_with_prefix("beta[")]
        return np.asarray(self.draws[:, :, indices].reshape(-1, len(indices)))

    @cached_property
    def diagnostics(self) -> pd.DataFrame:
        """Per-parameter summary: moments, quantiles, MCSE, split R-hat, ESS."""
        return summarize(self.names, self.draws)

    def worst_rhat(self, names: list[str] | None = None) -> float:
        table = self.diagnostics
        rhat = table.loc[names, "rhat"] if names is not None else table["rhat"]
        return float(np.nanmax(rhat.to_numpy())) if len(rhat) else 1.0


def _initial_state(
    target: Target, rng: np.random.Generator, chain: int
) -> NutsState:
    for _ in range(MAX_INIT_ATTEMPTS):
        position = target.initial_position(rng)
        log_density, grad = target.value_and_grad(position)
        if math.isfinite(log_density) and np.all(np.isfinite(grad)):
            return NutsState(position, log_density, grad)
    raise PgxSelectError(
        f"chain {chain}: no finite starting point after {MAX_INIT_ATTEMPTS} attempts"
    )


def run_chain(target: Target, config: SamplerConfig, chain: int) -> ChainResult:
    """Warm up and sample one chain on substream ``chain`` of ``config.seed``."""
    started = time.perf_counter()
    rng = substream(config.seed, chain)
    value_and_grad = target.value_and_grad
    state = _initial_state(target, rng, chain)
    inv_mass_diag = np.ones(target.dim)
    warmup_accept: list[float] = []

    with tracer.start_as_current_span(
        "sampler.chain", attributes={"chain": chain, "dim": target.dim}
    ):
        if config.step_size is None:
            step_size = find_reasonable_step_size(
                state, value_and_grad, 1.0, inv_mass_diag, rng
            )
            adaptation = WindowedAdaptation(
                target.dim, config.n_warmup, config.target_accept, step_size
            )
            for _ in range(config.n_warmup):
                state, info = nuts_draw(
                    state,
                    value_and_grad,
                    adaptation.step_size,
                    adaptation.inv_mass_diag,
                    config.max_tree_depth,
                    rng,
                    config.max_energy_error,
                )
                warmup_accept.append(info.accept_stat)
                if adaptation.update(state.position, info.accept_stat):
                    adaptation.restart_step_size(
                        find_reasonable_step_size(
                            state,
                            value_and_grad,
                            adaptation.step_size,
                            adaptation.inv_mass_diag,
                            rng,
                        )
                    )
            step_size = adaptation.final_step_size
            inv_mass_diag = adaptation.inv_mass_diag
        else:
            step_size = config.step_size
            for _ in range(config.n_warmup):
                state, info = nuts_draw(
                    state,
                    value_and_grad,
                    step_size,
                    inv_mass_diag,
                    config.max_tree_depth,
                    rng,
                    config.max_energy_error,
                )
                warmup_accept.append(info.accept_stat)

        names = target.constrained_names()
        draws = np.empty((config.n_samples, len(names)))
        stats = {name: np.empty(config.n_samples) for name in STAT_NAMES}
        for s in range(config.n_samples):
            state, info = nuts_draw(
                state,
                value_and_grad,
                step_size,
                inv_mass_diag,
                config.max_tree_depth,
                rng,
                config.max_energy_error,
            )
            draws[s] = target.constrain_draw(state.position)
            stats["accept_stat"][s] = info.accept_stat
            stats["step_size"][s] = info.step_size
            stats["tree_depth"][s] = info.tree_depth
            stats["n_leapfrog"][s] = info.n_leapfrog
            stats["divergent"][s] = float(info.divergent)
            stats["energy"][s] = info.energy
            stats["lp"][s] = state.log_density

    result = ChainResult(
        chain=chain,
        draws=draws,
        stats=stats,
        step_size=step_size,
        inv_mass_diag=inv_mass_diag,
        warmup_accept=float(np.mean(warmup_accept)) if warmup_accept else float("nan"),
        seconds=time.perf_counter() - started,
    )
    logger.info(
        "Chain %d finished",
        chain,
        extra={
            "chain": chain,
            "step_size": step_size,
            "divergences": int(stats["divergent"].sum()),
            "mean_accept": float(stats["accept_stat"].mean()),
            "seconds": round(result.seconds, 2),
        },
    )
    return result


def _run_chain_task(args: tuple[Target, SamplerConfig, int]) -> ChainResult:
    target, config, chain = args
    return run_chain(target, config, chain)


def sample_chains(
    target: Target,
    config: SamplerConfig,
    jobs: int = 1,
    attributes: dict[str, str] | None = None,
) -> PosteriorDraws:
    """Run ``config.n_chains`` independent chains and stack their draws.

    Chains run in worker processes when ``jobs`` > 1; chain k always uses
    substream k of the seed, so the draws do not depend on ``jobs``.

    Args:
        target: Model exposing the sampler protocol
        config: Sampler configuration
        jobs: Worker processes
        attributes: Extra labels for spans and metrics, e.g. the prior name

    Returns:
        Draws of all chains in chain order
    """
    labels = dict(attributes or {})
    with tracer.start_as_current_span(
        "sampler.sample",
        attributes={**labels, "chains": config.n_chains, "seed": config.seed},
    ):
        work = [(target, config, chain) for chain in range(config.n_chains)]
        if jobs <= 1 or config.n_chains == 1:
            results = [_run_chain_task(item) for item in work]
        else:
            workers = min(jobs, config.n_chains)
            with ProcessPoolExecutor(
                max_workers=workers,
                mp_context=get_context("spawn"),
                initializer=init_worker,
            ) as pool:
                results = list(pool.map(_run_chain_task, work))

    draws = PosteriorDraws(
        names=target.constrained_names(),
        draws=np.stack([r.draws for r in results]),
        stats={
            name: np.stack([r.stats[name] for r in results]) for name in STAT_NAMES
        },
        step_sizes=np.array([r.step_size for r in results]),
        inv_mass_diags=np.stack([r.inv_mass_diag for r in results]),
        config=config,
        metadata={"warmup_accept": [r.warmup_accept for r in results], **labels},
    )
    divergence_counter.add(draws.n_divergent, labels)
    draw_counter.add(draws.n_chains * draws.n_samples, labels)
    if draws.n_divergent:
        logger.warning(
            "Divergent transitions after warm-up",
            extra={**labels, "divergences": draws.n_divergent},
        )
    return draws
