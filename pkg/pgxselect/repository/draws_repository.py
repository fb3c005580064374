"""Fit directories: per-chain draw CSVs, summaries, prior and adaptation state."""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from pgxselect.exceptions import DataValidationError
from pgxselect.repository.manifest_repository import ManifestRepository
from pgxselect.sampler.runner import STAT_NAMES, PosteriorDraws
from pgxselect.schemas.prior_schema import PriorSpec, prior_from_json, prior_to_json
from pgxselect.schemas.run_schema import SamplerConfig

logger = logging.getLogger(__name__)

STAT_SUFFIX = "__"
SUMMARY_NAME = "summary.csv"
PRIOR_NAME = "prior.json"
ADAPTATION_NAME = "adaptation.json"


def chain_file_name(chain: int) -> str:
    return f"chain_{chain}.csv"


class DrawsRepository:
    """Reads and writes the artifacts of one posterior fit."""

    def __init__(self, directory: Path):
        """Initialize repository.

        Args:
            directory: Fit output directory
        """
        self.directory = directory

    def chain_paths(self) -> list[Path]:
        paths = sorted(
            self.directory.glob("chain_*.csv"),
            key=lambda path: int(path.stem.split("_")[1]),
        )
        return paths

    def save(self, draws: PosteriorDraws, prior: PriorSpec | None) -> list[Path]:
        """Write chain CSVs, the summary table, the prior and adaptation state.

        Chain files hold one row per retained draw: constrained parameters
        first, then sampler statistics with a ``__`` suffix.

        Returns:
            Written paths
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        for chain in range(draws.n_chains):
            table = pd.DataFrame(draws.draws[chain], columns=draws.names)
            stats = pd.DataFrame(
                {
                    f"{name}{STAT_SUFFIX}": draws.stats[name][chain]
                    for name in STAT_NAMES
                    if name in draws.stats
                }
            )
            path = self.directory / chain_file_name(chain)
            pd.concat([table, stats], axis=1).to_csv(path, index=False)
            written.append(path)

        summary_path = self.directory / SUMMARY_NAME
        draws.diagnostics.to_csv(summary_path)
        written.append(summary_path)

        if prior is not None:
            prior_path = self.directory / PRIOR_NAME
            prior_path.write_text(json.dumps(prior_to_json(prior), indent=2) + "\n")
            written.append(prior_path)

        adaptation_path = self.directory / ADAPTATION_NAME
        adaptation_path.write_text(
            json.dumps(
                {
                    "step_sizes": draws.step_sizes.tolist(),
                    "inv_mass_diags": draws.inv_mass_diags.tolist(),
                }
            )
            + "\n"
        )
        written.append(adaptation_path)
        logger.info(
            "Saved %d chains to %s",
            draws.n_chains,
            self.directory,
            extra={"divergences": draws.n_divergent},
        )
        return written

    def load(self) -> PosteriorDraws:
        """Rebuild the draws of a fit directory.

        Raises:
            DataValidationError: If chain files are missing or inconsistent
        """
        paths = self.chain_paths()
        if not paths:
            raise DataValidationError(f"no chain files in {self.directory}")
        tables = [pd.read_csv(path) for path in paths]
        columns = list(tables[0].columns)
        if any(list(table.columns) != columns for table in tables):
            raise DataValidationError(
                f"chain files in {self.directory} disagree on columns"
            )
        if len({len(table) for table in tables}) != 1:
            raise DataValidationError(
                f"chain files in {self.directory} differ in length"
            )
        names = [c for c in columns if not c.endswith(STAT_SUFFIX)]
        stats = {
            name: np.stack([t[f"{name}{STAT_SUFFIX}"].to_numpy() for t in tables])
            for name in STAT_NAMES
            if f"{name}{STAT_SUFFIX}" in columns
        }

        manifest = ManifestRepository(self.directory).load()
        try:
            config = SamplerConfig.model_validate(manifest.config.get("sampler", {}))
        except ValidationError as exc:
            raise DataValidationError(
                f"invalid sampler config in manifest: {exc}"
            ) from exc

        adaptation_path = self.directory / ADAPTATION_NAME
        if adaptation_path.is_file():
            adaptation = json.loads(adaptation_path.read_text())
            step_sizes = np.asarray(adaptation["step_sizes"], dtype=float)
            inv_mass = np.asarray(adaptation["inv_mass_diags"], dtype=float)
        else:
            step_sizes = np.full(len(tables), np.nan)
            inv_mass = np.empty((len(tables), 0))

        return PosteriorDraws(
            names=names,
            draws=np.stack([t[names].to_numpy(dtype=float) for t in tables]),
            stats=stats,
            step_sizes=step_sizes,
            inv_mass_diags=inv_mass,
            config=config,
            metadata={"prior": manifest.config.get("prior_name", "none")},
        )

    def load_prior(self) -> PriorSpec | None:
        path = self.directory / PRIOR_NAME
        if not path.is_file():
            return None
        try:
            return prior_from_json(json.loads(path.read_text()))
        except (json.JSONDecodeError, ValidationError, ValueError) as exc:
            raise DataValidationError(f"invalid prior file {path}: {exc}") from exc
