"""Posterior inclusion probabilities and selection performance."""

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.stats import norm

from pgxselect.exceptions import DimensionError
from pgxselect.model.priors import spike_slab_pip
from pgxselect.schemas.prior_schema import SpikeSlab

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.4
DEFAULT_EPSILON = 0.01
EPSILON_GRID = (0.001, 0.005, 0.01, 0.02, 0.05)
TAU_GRID = tuple(np.round(np.arange(0.05, 1.0, 0.05), 2))
ANALYTICAL = "analytical"

Epsilon = float | str


def snap_epsilon(epsilon: Epsilon, grid: Sequence[float] = EPSILON_GRID) -> Epsilon:
    """The grid tolerance numerically equal to ``epsilon``, else ``epsilon`` itself."""
    if epsilon == ANALYTICAL:
        return ANALYTICAL
    for value in grid:
        if np.isclose(value, float(epsilon)):
            return float(value)
    return float(epsilon)


def tolerance_grid(
    epsilon: Epsilon, grid: Sequence[float] = EPSILON_GRID
) -> tuple[float, ...]:
    """The tolerance grid extended with an off-grid ``epsilon``."""
    snapped = snap_epsilon(epsilon, grid)
    if snapped == ANALYTICAL or snapped in grid:
        return tuple(grid)
    return tuple(sorted((*grid, float(snapped))))


def analytical_pip(
    beta_draws: Any, gamma_draws: Any, spec: SpikeSlab, omega_cl: Any = 1.0
) -> NDArray[np.float64]:
    """Rao-Blackwellized spike-and-slab PIP averaged over draws.

    Args:
        beta_draws: (draws, snps) effects
        gamma_draws: (draws,) inclusion probabilities
        spec: Spike-and-slab hyperparameters
        omega_cl: Scalar or (draws,) clearance inter-individual SD

    Returns:
        PIP per SNP
    """
    beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    gamma = np.asarray(gamma_draws, dtype=float).reshape(-1, 1)
    omega = np.asarray(omega_cl, dtype=float)
    if omega.ndim:
        omega = omega.reshape(-1, 1)
    if gamma.shape[0] != beta.shape[0]:
        raise DimensionError("need one gamma draw per effect draw")
    return np.asarray(spike_slab_pip(beta, gamma, spec, omega).mean(axis=0))


def proxy_pip(beta_draws: Any, epsilon: float) -> NDArray[np.float64]:
    """Share of draws with |beta_j| > epsilon."""
    beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    return np.asarray(np.mean(np.abs(beta) > epsilon, axis=0))


@dataclass
class PipTable:
    """Per-SNP inclusion probabilities of one fit.

    ``proxy`` has one row per tolerance in ``epsilons``; ``analytical`` is
    present for Spike-and-Slab fits only.
    """

    prior: str
    snp_ids: list[str]
    epsilons: list[float]
    proxy: NDArray[np.float64]
    analytical: NDArray[np.float64] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def pips(self, epsilon: Epsilon = DEFAULT_EPSILON) -> pd.Series:
        """PIP per SNP at a tolerance, or the analytical PIP."""
        if epsilon == ANALYTICAL:
            if self.analytical is None:
                raise ValueError(f"no analytical PIP for prior {self.prior}")
            values = self.analytical
        else:
            matches = [
                k for k, e in enumerate(self.epsilons) if np.isclose(e, float(epsilon))
            ]
            if not matches:
                raise ValueError(f"epsilon {epsilon} not in {self.epsilons}")
            values = self.proxy[matches[0]]
        index = pd.Index(self.snp_ids, name="snp")
        return pd.Series(values, index=index, name=self.prior)

    def available(self) -> list[Epsilon]:
        grid: list[Epsilon] = list(self.epsilons)
        if self.analytical is not None:
            grid.append(ANALYTICAL)
        return grid

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns prior, snp, epsilon, pip."""
        frames = [
            pd.DataFrame(
                {
                    "prior": self.prior,
                    "snp": self.snp_ids,
                    "epsilon": str(epsilon),
                    "pip": self.pips(epsilon).to_numpy(),
                }
            )
            for epsilon in self.available()
        ]
        return pd.concat(frames, ignore_index=True)


def build_pip_table(
    prior: str,
    snp_ids: list[str],
    beta_draws: Any,
    epsilons: Sequence[float] = EPSILON_GRID,
    gamma_draws: Any | None = None,
    spec: SpikeSlab | None = None,
    omega_cl: Any = 1.0,
) -> PipTable:
    """Proxy PIPs over a tolerance grid, plus analytical PIPs when available."""
    beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    if beta.shape[1] != len(snp_ids):
        raise DimensionError(f"{beta.shape[1]} effect columns for {len(snp_ids)} SNPs")
    ordered = sorted(float(e) for e in epsilons)
    proxy = np.stack([proxy_pip(beta, e) for e in ordered])
    analytical = None
    if spec is not None and gamma_draws is not None:
        analytical = analytical_pip(beta, gamma_draws, spec, omega_cl)
    return PipTable(prior, list(snp_ids), ordered, proxy, analytical)


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> tuple[float, float]:
    """Wilson score interval of a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    phat = successes / trials
    denominator = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denominator
    spread = phat * (1 - phat) / trials + z**2 / (4 * trials**2)
    half = z * np.sqrt(spread) / denominator
    return max(0.0, float(center - half)), min(1.0, float(center + half))


def selected(pips: pd.Series, tau: float) -> set[str]:
    return set(pips.index[pips.to_numpy() > tau])


def fwer(
    pip_tables: Iterable[pd.Series], tau: float = DEFAULT_TAU
) -> tuple[float, tuple[float, float]]:
    """Share of null datasets with at least one selection, and its Wilson CI."""
    flags = [bool(selected(pips, tau)) for pips in pip_tables]
    if not flags:
        raise ValueError("no datasets to evaluate")
    rate = sum(flags) / len(flags)
    return rate, wilson_interval(sum(flags), len(flags))


def f1_score(pips: pd.Series, truth: set[str], tau: float = DEFAULT_TAU) -> float:
    """F1 of the selection {PIP > tau} against the true causal set."""
    chosen = selected(pips, tau)
    hits = len(chosen & truth)
    precision = hits / max(len(chosen), 1)
    recall = hits / max(len(truth), 1)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def f1_curve(
    pip_tables: Sequence[pd.Series],
    truths: Sequence[set[str]],
    taus: Sequence[float] = TAU_GRID,
) -> pd.DataFrame:
    """Mean F1 over datasets per cutoff, with the sample SE of the mean."""
    if len(pip_tables) != len(truths):
        raise DimensionError("need one truth set per PIP table")
    rows = []
    for tau in taus:
        scores = np.array(
            [f1_score(p, t, tau) for p, t in zip(pip_tables, truths, strict=True)]
        )
        se = scores.std(ddof=1) / np.sqrt(scores.size) if scores.size > 1 else 0.0
        rows.append({"tau": float(tau), "mean_f1": scores.mean(), "se": se})
    return pd.DataFrame(rows)


def rank_snps(pips: pd.Series) -> pd.Series:
    """Rank 1 for the largest PIP; ties go to the lexicographically smaller id."""
    order = sorted(pips.index, key=lambda snp: (-pips[snp], snp))
    return pd.Series(np.arange(1, len(order) + 1), index=pd.Index(order, name="snp"))


def consensus_rank(
    pip_tables: Mapping[str, pd.Series],
    genotypes: pd.DataFrame | None = None,
    reference_snp: str | None = None,
) -> pd.DataFrame:
    """Order SNPs by their mean PIP rank across priors.

    Args:
        pip_tables: PIP series per prior, indexed by SNP id
        genotypes: Optional raw allele counts (subjects x SNPs) for MAF and
            correlation columns
        reference_snp: SNP whose Pearson correlation is reported as ``rho``

    Returns:
        Table indexed by SNP with ``rank_<prior>`` columns, ``mean_rank``,
        and optionally ``rho`` and ``maf``
    """
    if not pip_tables:
        raise ValueError("no PIP tables to rank")
    table = pd.DataFrame(
        {f"rank_{prior}": rank_snps(pips) for prior, pips in pip_tables.items()}
    )
    table.index.name = "snp"
    table["mean_rank"] = table.mean(axis=1)
    table = table.reset_index().sort_values(["mean_rank", "snp"]).set_index("snp")
    if genotypes is not None:
        counts = genotypes.astype(float)
        if reference_snp is not None:
            if reference_snp not in counts.columns:
                raise ValueError(f"reference SNP {reference_snp} not in genotypes")
            table["rho"] = [
                float(np.corrcoef(counts[snp], counts[reference_snp])[0, 1])
                for snp in table.index
            ]
        table["maf"] = [float(counts[snp].mean() / 2.0) for snp in table.index]
    table["tie_break"] = "snp_id"
    return table


def pip_curves(table: PipTable) -> pd.DataFrame:
    """Proxy PIP per SNP against the tolerance grid."""
    frame = pd.DataFrame(table.proxy.T, index=table.snp_ids, columns=table.epsilons)
    long = frame.rename_axis("snp").reset_index().melt(
        id_vars="snp", var_name="epsilon", value_name="pip"
    )
    long.insert(0, "prior", table.prior)
    return long


def effect_summary(snp_ids: list[str], beta_draws: Any) -> pd.DataFrame:
    """Posterior mean, median and 95% credible interval per SNP effect."""
    beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    low, median, high = np.quantile(beta, [0.025, 0.5, 0.975], axis=0)
    return pd.DataFrame(
        {
            "snp": snp_ids,
            "mean": beta.mean(axis=0),
            "median": median,
            "q025": low,
            "q975": high,
        }
    )
