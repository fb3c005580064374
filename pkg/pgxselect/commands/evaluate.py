"""``evaluate``: FWER under H0 and F1 curves under H1 across many fits."""

import argparse
import glob
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from pgxselect.commands.common import command_config, fit_pip_table, fit_truth
from pgxselect.config import Settings
from pgxselect.exceptions import DataValidationError
from pgxselect.metrics import (
    ANALYTICAL,
    DEFAULT_EPSILON,
    DEFAULT_TAU,
    TAU_GRID,
    Epsilon,
    PipTable,
    f1_curve,
    fwer,
    pip_curves,
    rank_snps,
    selected,
    snap_epsilon,
    tolerance_grid,
)
from pgxselect.repository.manifest_repository import (
    MANIFEST_NAME,
    ManifestRepository,
    hash_inputs,
)
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.schemas.run_schema import TruthLabels

logger = logging.getLogger(__name__)

FWER_NAME = "fwer.csv"
F1_NAME = "f1_curve.csv"
SELECTION_NAME = "selection.csv"
PIP_CURVES_NAME = "pip_curves.csv"


def parse_epsilon(value: str) -> Epsilon:
    """``analytical`` or a positive float tolerance."""
    if value == ANALYTICAL:
        return ANALYTICAL
    try:
        epsilon = float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid tolerance {value!r}") from exc
    if epsilon <= 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return epsilon


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser(
        "evaluate", help="Score selections of many fits against their truth labels"
    )
    parser.add_argument(
        "--fits", nargs="+", required=True, help="Fit directories or glob patterns"
    )
    parser.add_argument(
        "--truth",
        type=Path,
        default=None,
        help="Truth JSON for every fit; defaults to each fit's recorded truth",
    )
    parser.add_argument("--tau", type=float, default=DEFAULT_TAU)
    parser.add_argument("--epsilon", type=parse_epsilon, default=DEFAULT_EPSILON)
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def expand_fits(patterns: list[str]) -> list[Path]:
    """Fit directories matched by paths or glob patterns, sorted and de-duplicated.

    Raises:
        DataValidationError: If nothing matches
    """
    found: set[Path] = set()
    for pattern in patterns:
        matches = glob.glob(pattern) if any(c in pattern for c in "*?[") else [pattern]
        found.update(
            Path(match) for match in matches if (Path(match) / MANIFEST_NAME).is_file()
        )
    if not found:
        raise DataValidationError(f"no fit directories match {patterns}")
    return sorted(found)


def _selection_row(
    table: PipTable, truth: TruthLabels, epsilon: Epsilon, tau: float
) -> dict[str, Any]:
    pips = table.pips(epsilon)
    ranks = rank_snps(pips)
    top = str(ranks.index[0])
    causal_ranks = [int(ranks[snp]) for snp in truth.causal_set if snp in ranks.index]
    chosen = sorted(selected(pips, tau))
    return {
        "fit": table.metadata["fit"],
        "prior": table.prior,
        "hypothesis": truth.hypothesis,
        "epsilon": str(epsilon),
        "tau": tau,
        "n_selected": len(chosen),
        "selected": ";".join(chosen),
        "top_snp": top,
        "top_pip": float(pips[top]),
        "causal_rank": min(causal_ranks) if causal_ranks else None,
    }


def fwer_table(null_tables: dict[str, list[PipTable]], tau: float) -> pd.DataFrame:
    rows = []
    for prior, tables in sorted(null_tables.items()):
        for epsilon in tables[0].available():
            series = [table.pips(epsilon) for table in tables]
            rate, (low, high) = fwer(series, tau)
            rows.append(
                {
                    "prior": prior,
                    "epsilon": str(epsilon),
                    "tau": tau,
                    "n_datasets": len(series),
                    "n_with_selection": sum(bool(selected(s, tau)) for s in series),
                    "fwer": rate,
                    "ci_low": low,
                    "ci_high": high,
                }
            )
    return pd.DataFrame(rows)


def f1_table(
    alt_tables: dict[str, list[tuple[PipTable, TruthLabels]]],
) -> pd.DataFrame:
    frames = []
    for prior, pairs in sorted(alt_tables.items()):
        truths = [truth.causal_set for _, truth in pairs]
        for epsilon in pairs[0][0].available():
            curve = f1_curve(
                [table.pips(epsilon) for table, _ in pairs], truths, TAU_GRID
            )
            curve.insert(0, "prior", prior)
            curve.insert(2, "epsilon", str(epsilon))
            frames.append(curve)
    columns = ["prior", "tau", "epsilon", "mean_f1", "se"]
    if not frames:
        return pd.DataFrame(columns=columns)
    return pd.concat(frames, ignore_index=True)[columns]


def mean_pip_curves(tables: list[PipTable]) -> pd.DataFrame:
    """Proxy PIP against tolerance averaged over the fits of each prior."""
    curves = pd.concat([pip_curves(table) for table in tables], ignore_index=True)
    return (
        curves.groupby(["prior", "snp", "epsilon"], sort=True)["pip"]
        .mean()
        .reset_index()
    )


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Write FWER, F1 curves, per-fit selections and mean PIP curves."""
    directories = expand_fits(args.fits)
    epsilon = snap_epsilon(args.epsilon)
    grid = tolerance_grid(epsilon)
    null_tables: dict[str, list[PipTable]] = defaultdict(list)
    alt_tables: dict[str, list[tuple[PipTable, TruthLabels]]] = defaultdict(list)
    selections = []
    tables = []
    for directory in directories:
        table = fit_pip_table(directory, grid)
        truth = fit_truth(directory, args.truth)
        if truth is None:
            raise DataValidationError(f"no truth labels for {directory}; pass --truth")
        tables.append(table)
        if truth.hypothesis == "h0" or not truth.causal:
            null_tables[table.prior].append(table)
        else:
            alt_tables[table.prior].append((table, truth))
        if epsilon not in table.available():
            raise DataValidationError(
                f"tolerance {epsilon} not available for {table.prior} fit {directory}"
            )
        selections.append(_selection_row(table, truth, epsilon, args.tau))

    args.out.mkdir(parents=True, exist_ok=True)
    fwer_frame = fwer_table(null_tables, args.tau)
    f1_frame = f1_table(alt_tables)
    selection_frame = pd.DataFrame(selections)
    fwer_frame.to_csv(args.out / FWER_NAME, index=False)
    f1_frame.to_csv(args.out / F1_NAME, index=False)
    selection_frame.to_csv(args.out / SELECTION_NAME, index=False)
    mean_pip_curves(tables).to_csv(args.out / PIP_CURVES_NAME, index=False)

    results: dict[str, Any] = {"n_fits": len(directories)}
    if not fwer_frame.empty:
        at_epsilon = fwer_frame[fwer_frame["epsilon"] == str(epsilon)]
        results["fwer"] = dict(
            zip(at_epsilon["prior"], at_epsilon["fwer"], strict=True)
        )
    if not f1_frame.empty:
        at_tau = f1_frame[
            np.isclose(f1_frame["tau"], args.tau)
            & (f1_frame["epsilon"] == str(epsilon))
        ]
        results["mean_f1"] = dict(zip(at_tau["prior"], at_tau["mean_f1"], strict=True))
        alt = selection_frame[selection_frame["causal_rank"].notna()]
        results["causal_top"] = {
            prior: int((group["causal_rank"] == 1).sum())
            for prior, group in alt.groupby("prior")
        }

    ManifestRepository(args.out).save(
        RunManifest(
            command="evaluate",
            argv=args.argv,
            inputs=hash_inputs([args.truth] if args.truth else []),
            config={**command_config(args), "fits": [str(d) for d in directories]},
            outputs=[FWER_NAME, F1_NAME, SELECTION_NAME, PIP_CURVES_NAME],
            results=results,
        )
    )
    logger.info("Evaluated fits", extra={"n_fits": len(directories), **results})
    return 0
