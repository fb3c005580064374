"""``diagnose``: normalized prediction discrepancies of a fit."""

import argparse
import logging
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from pgxselect.commands.common import command_config
from pgxselect.config import Settings
from pgxselect.diagnostics import (
    DEFAULT_BINS,
    DEFAULT_REPLICATES,
    ks_normal,
    npd,
    npd_summaries,
    posterior_predictive,
    render_npd_panel,
    sampling_scheme,
)
from pgxselect.exceptions import DataValidationError
from pgxselect.repository.dataset_repository import SNPS_NAME, read_dataset
from pgxselect.repository.draws_repository import DrawsRepository
from pgxselect.repository.manifest_repository import ManifestRepository, hash_inputs
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.streams import substream

logger = logging.getLogger(__name__)

NPD_NAME = "npd.csv"
SUMMARY_NAME = "npd_summary.csv"

# Substream indices of the root seed
REPLICATE_STREAM = 0
BOOTSTRAP_STREAM = 1


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser(
        "diagnose", help="Posterior-predictive NPD scores and binned panels"
    )
    parser.add_argument("--fit", type=Path, required=True, help="Fit directory")
    parser.add_argument("--data", type=Path, required=True, help="observations.csv")
    parser.add_argument(
        "--snps", type=Path, default=None, help="snps.csv (default: the fit's input)"
    )
    parser.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    parser.add_argument(
        "--group-by", choices=["scheme", "occasion", "none"], default="scheme"
    )
    parser.add_argument("--bins", type=int, default=DEFAULT_BINS)
    parser.add_argument("--bootstrap", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def _snps_path(args: argparse.Namespace) -> Path:
    if args.snps is not None:
        return Path(args.snps)
    recorded = ManifestRepository(args.fit).load().config.get("snps")
    if recorded and Path(recorded).is_file():
        return Path(recorded)
    return args.data.parent / SNPS_NAME


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Write per-observation NPDs, binned summaries, SVG panels and KS results."""
    if args.replicates < 1 or args.bins < 1:
        raise DataValidationError("--replicates and --bins must be positive")
    draws = DrawsRepository(args.fit).load()
    fit_config = ManifestRepository(args.fit).load().config
    snps_path = _snps_path(args)
    dataset = read_dataset(args.data, snps_path, fit_config.get("dose_interval", 12.0))
    missing = [
        sid for sid in dataset.subject_ids if f"eta_cl[{sid}]" not in draws.names
    ]
    if missing:
        raise DataValidationError(f"subjects not in fit {args.fit}: {missing[:5]}")

    replicates = posterior_predictive(
        draws, dataset, args.replicates, substream(args.seed, REPLICATE_STREAM)
    )
    frame = dataset.observation_frame()
    frame["group"] = sampling_scheme(dataset, args.group_by).to_numpy()
    frame["npd"] = npd(frame["concentration"].to_numpy(), replicates)

    args.out.mkdir(parents=True, exist_ok=True)
    frame[["subject_id", "occasion", "time_h", "group", "npd"]].to_csv(
        args.out / NPD_NAME, index=False
    )

    bootstrap_rng = substream(args.seed, BOOTSTRAP_STREAM)
    statistic, pvalue = ks_normal(frame["npd"])
    results: dict[str, Any] = {
        "ks_statistic": statistic,
        "ks_pvalue": pvalue,
        "npd_mean": float(frame["npd"].mean()),
        "npd_sd": float(frame["npd"].std(ddof=1)),
        "groups": {},
    }
    summaries = []
    outputs = [NPD_NAME, SUMMARY_NAME]
    for group, rows in frame.groupby("group", sort=True):
        summary = npd_summaries(
            rows["npd"], rows["time_h"], args.bins, args.bootstrap, bootstrap_rng
        )
        summary.insert(0, "group", group)
        summaries.append(summary)
        panel = f"npd_{group}.svg"
        render_npd_panel(
            summary,
            args.out / panel,
            f"{group} (n = {len(rows)})",
            scores=rows["npd"].to_numpy(),
            times=rows["time_h"].to_numpy(),
        )
        outputs.append(panel)
        group_statistic, group_pvalue = ks_normal(rows["npd"])
        results["groups"][group] = {
            "n": int(len(rows)),
            "ks_statistic": group_statistic,
            "ks_pvalue": group_pvalue,
        }
    pd.concat(summaries, ignore_index=True).to_csv(args.out / SUMMARY_NAME, index=False)

    ManifestRepository(args.out).save(
        RunManifest(
            command="diagnose",
            argv=args.argv,
            inputs=hash_inputs(
                [args.data, snps_path, *DrawsRepository(args.fit).chain_paths()]
            ),
            config={**command_config(args), "snps": str(snps_path)},
            seeds={"replicates": args.seed},
            outputs=outputs,
            results=results,
        )
    )
    if pvalue < 0.05:
        logger.warning(
            "NPD scores depart from N(0, 1)",
            extra={"ks_statistic": statistic, "ks_pvalue": pvalue},
        )
    logger.info(
        "Diagnosed fit",
        extra={"fit": str(args.fit), "n_observations": int(np.size(frame["npd"]))},
    )
    return 0
