"""``rank``: consensus SNP ranking across priors."""

import argparse
import logging
from collections import defaultdict
from pathlib import Path

import pandas as pd

from pgxselect.commands.common import command_config, fit_pip_table
from pgxselect.commands.evaluate import expand_fits, parse_epsilon
from pgxselect.config import Settings
from pgxselect.exceptions import DataValidationError
from pgxselect.metrics import (
    DEFAULT_EPSILON,
    consensus_rank,
    snap_epsilon,
    tolerance_grid,
)
from pgxselect.repository.dataset_repository import read_table
from pgxselect.repository.manifest_repository import ManifestRepository, hash_inputs
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.simulate import CAUSAL_SNP

logger = logging.getLogger(__name__)

CONSENSUS_NAME = "consensus.csv"
PIPS_NAME = "pips.csv"


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser(
        "rank", help="Rank SNPs by their mean PIP rank across prior fits"
    )
    parser.add_argument("--fits", nargs="+", required=True, help="Fit directories")
    parser.add_argument("--epsilon", type=parse_epsilon, default=DEFAULT_EPSILON)
    parser.add_argument(
        "--snps", type=Path, default=None, help="snps.csv for MAF and correlation"
    )
    parser.add_argument("--reference-snp", default=CAUSAL_SNP)
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def read_genotypes(path: Path) -> pd.DataFrame:
    """Raw allele counts indexed by subject."""
    table = read_table(path)
    if "subject_id" not in table.columns:
        raise DataValidationError(f"{path}: missing column subject_id")
    return table.set_index("subject_id")


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Write the consensus table and the PIPs it was built from.

    Several fits of the same prior are averaged before ranking.
    """
    directories = expand_fits(args.fits)
    epsilon = snap_epsilon(args.epsilon)
    grid = tolerance_grid(epsilon)
    by_prior: dict[str, list[pd.Series]] = defaultdict(list)
    for directory in directories:
        table = fit_pip_table(directory, grid)
        if epsilon not in table.available():
            raise DataValidationError(
                f"tolerance {epsilon} not available "
                f"for {table.prior} fit {directory}"
            )
        by_prior[table.prior].append(table.pips(epsilon))

    pips = {
        prior: pd.concat(series, axis=1).mean(axis=1).rename(prior)
        for prior, series in sorted(by_prior.items())
    }
    snp_sets = {frozenset(series.index) for series in pips.values()}
    if len(snp_sets) != 1:
        raise DataValidationError("fits disagree on their SNP sets")

    genotypes = read_genotypes(args.snps) if args.snps is not None else None
    reference = args.reference_snp
    if genotypes is not None and reference not in genotypes.columns:
        logger.warning(
            "Reference SNP missing from genotypes; skipping correlation",
            extra={"reference_snp": reference},
        )
        reference = None
    table = consensus_rank(pips, genotypes, reference)

    args.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out / CONSENSUS_NAME)
    pd.DataFrame(pips).rename_axis("snp").to_csv(args.out / PIPS_NAME)

    ManifestRepository(args.out).save(
        RunManifest(
            command="rank",
            argv=args.argv,
            inputs=hash_inputs([args.snps] if args.snps is not None else []),
            config={**command_config(args), "fits": [str(d) for d in directories]},
            outputs=[CONSENSUS_NAME, PIPS_NAME],
            results={"top_snps": list(table.index[:5])},
        )
    )
    logger.info(
        "Ranked SNPs",
        extra={"priors": sorted(pips), "top_snp": str(table.index[0])},
    )
    return 0
