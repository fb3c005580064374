"""Synthetic H0/H1 pharmacogenetic datasets and genotype standardization."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from multiprocessing import get_context
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from pgxselect.exceptions import DataValidationError
from pgxselect.model.pk import steady_state_bateman
from pgxselect.schemas.dataset_schema import Dataset, Observation, SubjectRecord
from pgxselect.schemas.run_schema import SimulationConfig, TruthLabels
from pgxselect.streams import substream
from pgxselect.telemetry import init_worker

logger = logging.getLogger(__name__)

Hypothesis = Literal["h0", "h1"]

POOL_SEED = 12154
POOL_SUBJECTS = 129
POOL_SNPS = 134
CAUSAL_SNP = "rs3745274"
CAUSAL_MINOR_COUNT = 90  # MAF 0.348 over 258 haplotypes
RARE_SNP = "rs1523129"
MAX_RESAMPLE_ATTEMPTS = 200


@dataclass(frozen=True)
class SnpPool:
    """Genotype pool from which cohorts are resampled row-wise."""

    matrix: NDArray[np.int64]
    snp_ids: tuple[str, ...]

    @property
    def maf(self) -> NDArray[np.float64]:
        return np.asarray(self.matrix.mean(axis=0) / 2.0)

    def columns(self, snp_ids: list[str]) -> NDArray[np.int64]:
        index = {snp: j for j, snp in enumerate(self.snp_ids)}
        missing = [snp for snp in snp_ids if snp not in index]
        if missing:
            raise DataValidationError(f"SNPs not in pool: {missing}")
        return self.matrix[:, [index[snp] for snp in snp_ids]]


@lru_cache
def reference_snp_pool() -> SnpPool:
    """Bundled 129 x 134 synthetic genotype pool.

    Haplotypes are drawn from Gaussian AR(1) blocks of 2 to 8 adjacent SNPs
    (within-block correlation 0.4 to 0.95) and thresholded so each column
    carries an exact minor-allele count. Column 0 is rs3745274 with 90 minor
    alleles; the last column, rs1523129, carries a single one. Every column
    segregates.
    """
    rng = np.random.Generator(np.random.Philox(POOL_SEED))
    n_haplotypes = 2 * POOL_SUBJECTS
    latent = np.empty((n_haplotypes, POOL_SNPS))
    column = 0
    while column < POOL_SNPS:
        width = min(int(rng.integers(2, 9)), POOL_SNPS - column)
        rho = rng.uniform(0.4, 0.95)
        latent[:, column] = rng.standard_normal(n_haplotypes)
        for j in range(column + 1, column + width):
            innovation = rng.standard_normal(n_haplotypes)
            latent[:, j] = rho * latent[:, j - 1] + np.sqrt(1 - rho**2) * innovation
        column += width

    minor_counts = np.clip(
        np.rint(rng.uniform(0.02, 0.5, POOL_SNPS) * n_haplotypes), 3, n_haplotypes // 2
    ).astype(int)
    minor_counts[0] = CAUSAL_MINOR_COUNT
    minor_counts[-1] = 1

    haplotypes = np.zeros((n_haplotypes, POOL_SNPS), dtype=np.int64)
    for j in range(POOL_SNPS):
        haplotypes[np.argsort(latent[:, j], kind="stable")[: minor_counts[j]], j] = 1
    matrix = haplotypes[0::2] + haplotypes[1::2]

    ids: list[str] = [CAUSAL_SNP]
    taken = {CAUSAL_SNP, RARE_SNP}
    while len(ids) < POOL_SNPS - 1:
        candidate = f"rs{int(rng.integers(1_000_000, 99_999_999))}"
        if candidate not in taken:
            taken.add(candidate)
            ids.append(candidate)
    ids.append(RARE_SNP)

    matrix.setflags(write=False)
    return SnpPool(matrix=matrix, snp_ids=tuple(ids))


def standardize_snps(
    raw: NDArray[np.int64] | NDArray[np.float64], snp_ids: list[str] | None = None
) -> NDArray[np.float64]:
    """Center each column and scale it to unit population SD.

    Raises:
        DataValidationError: If a column has zero variance
    """
    matrix = np.asarray(raw, dtype=float)
    sd = matrix.std(axis=0)
    constant = np.flatnonzero(sd == 0)
    if constant.size:
        labels = [snp_ids[j] if snp_ids else f"column {j}" for j in constant]
        raise DataValidationError(
            f"SNP without variation cannot be standardized: {labels}"
        )
    return (matrix - matrix.mean(axis=0)) / sd


def sample_snp_pool(
    pool: NDArray[np.int64], n: int, rng: np.random.Generator
) -> NDArray[np.int64]:
    """Resample ``n`` whole rows with replacement, keeping LD between columns."""
    rows = rng.integers(0, pool.shape[0], size=n)
    return np.asarray(pool[rows])


def _segregating_cohort(
    columns: NDArray[np.int64], n: int, rng: np.random.Generator
) -> NDArray[np.int64]:
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        cohort = sample_snp_pool(columns, n, rng)
        if np.all(cohort.min(axis=0) != cohort.max(axis=0)):
            return cohort
    raise DataValidationError(
        f"could not draw a cohort of {n} in which every SNP segregates"
    )


def simulate_individual_parameters(
    config: SimulationConfig,
    genotypes: NDArray[np.float64],
    beta: NDArray[np.float64],
    rng: np.random.Generator,
) -> NDArray[np.float64]:
    """Log (ka, CL, V) per subject: mu + omega * u with genetic shift on CL."""
    u = rng.standard_normal((genotypes.shape[0], 3))
    log_phi = np.asarray(config.mu) + np.asarray(config.omega) * u
    log_phi[:, 1] += genotypes @ beta
    return log_phi


def generate_dataset(
    hypothesis: Hypothesis, config: SimulationConfig, rng: np.random.Generator
) -> tuple[Dataset, TruthLabels]:
    """Simulate one cohort under H0 (no genetic effect) or H1.

    Args:
        hypothesis: ``h0`` or ``h1``
        config: Study design and true parameter values
        rng: Generator owned by this replicate

    Returns:
        Dataset with raw genotype counts, and the true causal effects
    """
    pool = reference_snp_pool()
    snp_ids = list(config.snp_ids or pool.snp_ids[: config.n_snps])
    causal: dict[str, float] = {}
    if hypothesis == "h1":
        if config.causal_snp not in snp_ids:
            raise DataValidationError(
                f"causal SNP {config.causal_snp} not in SNP subset"
            )
        causal[config.causal_snp] = config.causal_effect

    raw = _segregating_cohort(pool.columns(snp_ids), config.n_subjects, rng)
    genotypes = standardize_snps(raw, snp_ids)
    beta = np.array([causal.get(snp, 0.0) for snp in snp_ids])
    log_phi = simulate_individual_parameters(config, genotypes, beta, rng)

    occasions = np.arange(1, config.n_occasions + 1)
    with_bov = config.n_occasions > 1 and config.psi_cl > 0
    kappa = (
        config.psi_cl * rng.standard_normal((config.n_subjects, config.n_occasions))
        if with_bov
        else np.zeros((config.n_subjects, config.n_occasions))
    )
    times = np.asarray(config.times_h)

    # (subject, occasion, time) grid
    phi = np.exp(log_phi)[:, None, None, :]
    curves = np.asarray(
        steady_state_bateman(
            phi[..., 0],
            phi[..., 1] * np.exp(kappa)[:, :, None],
            phi[..., 2],
            times[None, None, :],
            config.dose,
            config.dose_interval_h,
        )
    )
    noisy = curves + config.sigma * rng.standard_normal(curves.shape)
    n_clipped = int(np.sum(noisy < 0))
    concentrations = np.maximum(noisy, 0.0)

    subjects: list[SubjectRecord] = []
    for i in range(config.n_subjects):
        observations = [
            Observation(
                occasion=int(occasion),
                time_h=float(t),
                concentration=float(concentrations[i, o, k]),
            )
            for o, occasion in enumerate(occasions)
            for k, t in enumerate(times)
        ]
        subjects.append(
            SubjectRecord(
                id=f"S{i + 1:04d}", dose=config.dose, observations=observations
            )
        )
    if n_clipped:
        logger.debug("Clipped %d negative simulated concentrations to zero", n_clipped)

    dataset = Dataset(
        subjects=subjects,
        snp_matrix=raw,
        snp_ids=snp_ids,
        dose_interval_h=config.dose_interval_h,
    )
    return dataset, TruthLabels(hypothesis=hypothesis, causal=causal)


def _replicate(
    args: tuple[Hypothesis, SimulationConfig, int, int],
) -> tuple[Dataset, TruthLabels]:
    hypothesis, config, seed, index = args
    return generate_dataset(hypothesis, config, substream(seed, index))


def generate_replicates(
    hypothesis: Hypothesis,
    config: SimulationConfig,
    n_datasets: int,
    seed: int,
    jobs: int = 1,
) -> list[tuple[Dataset, TruthLabels]]:
    """Simulate ``n_datasets`` replicates, replicate k on substream k of ``seed``."""
    work = [(hypothesis, config, seed, k) for k in range(n_datasets)]
    logger.info(
        "Simulating datasets",
        extra={"hypothesis": hypothesis, "n_datasets": n_datasets, "seed": seed},
    )
    if jobs <= 1 or n_datasets <= 1:
        return [_replicate(item) for item in work]
    with ProcessPoolExecutor(
        max_workers=jobs, mp_context=get_context("spawn"), initializer=init_worker
    ) as pool:
        return list(pool.map(_replicate, work))


def population_curve(config: SimulationConfig) -> NDArray[np.float64]:
    """Typical-subject concentrations at the design times."""
    ka, cl, v = np.exp(config.mu)
    return np.asarray(
        steady_state_bateman(
            ka, cl, v, np.asarray(config.times_h), config.dose, config.dose_interval_h
        )
    )


def minor_allele_frequency(raw: NDArray[np.int64]) -> NDArray[np.float64]:
    """Column MAF of raw allele counts."""
    return np.asarray(np.asarray(raw, dtype=float).mean(axis=0) / 2.0)

