"""Helpers shared by the subcommands."""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, TypeVar

from pydantic import BaseModel, ValidationError

from pgxselect.config import Settings
from pgxselect.exceptions import DataValidationError
from pgxselect.metrics import EPSILON_GRID, PipTable, build_pip_table
from pgxselect.repository.dataset_repository import read_truth
from pgxselect.repository.draws_repository import DrawsRepository
from pgxselect.repository.manifest_repository import ManifestRepository
from pgxselect.schemas.prior_schema import (
    PRIOR_CLASSES,
    PresetName,
    PriorSpec,
    SpikeSlab,
    preset_prior,
    prior_from_json,
)
from pgxselect.schemas.run_schema import TruthLabels

logger = logging.getLogger(__name__)

NO_PRIOR = "none"

ModelT = TypeVar("ModelT", bound=BaseModel)


def resolve_jobs(args: argparse.Namespace, settings: Settings) -> int:
    """Worker count from ``--jobs``, falling back to the settings."""
    jobs = getattr(args, "jobs", None)
    return int(jobs) if jobs else settings.effective_jobs


def load_json(path: Path) -> Any:
    if not path.is_file():
        raise DataValidationError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"invalid JSON in {path}: {exc}") from exc


def load_model(model: type[ModelT], path: Path | None) -> ModelT:
    """Validate a JSON config file, or build the defaults when no file is given."""
    try:
        return model.model_validate(load_json(path) if path else {})
    except ValidationError as exc:
        raise DataValidationError(f"invalid {model.__name__} in {path}: {exc}") from exc


def load_prior(
    name: str, config_path: Path | None, preset: PresetName = "simulation"
) -> PriorSpec | None:
    """Prior from a JSON hyperparameter file, else from a named preset.

    Returns:
        None for the genetics-free model (``name == "none"``)
    """
    if name == NO_PRIOR:
        return None
    if name not in PRIOR_CLASSES:
        raise DataValidationError(f"unknown prior {name!r}")
    if config_path is None:
        return preset_prior(name, preset)
    data = load_json(config_path)
    if isinstance(data, dict) and name not in data:
        data = {name: data}
    try:
        spec = prior_from_json(data)
    except (ValidationError, ValueError) as exc:
        raise DataValidationError(f"invalid prior file {config_path}: {exc}") from exc
    if spec.name != name:
        raise DataValidationError(f"{config_path} configures {spec.name}, not {name}")
    return spec


def command_config(args: argparse.Namespace) -> dict[str, Any]:
    """JSON-friendly copy of the parsed arguments."""
    config: dict[str, Any] = {}
    for key, value in vars(args).items():
        if key in ("func", "argv"):
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, list):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        config[key] = value
    return config


def fit_pip_table(
    directory: Path, epsilons: tuple[float, ...] = EPSILON_GRID
) -> PipTable:
    """PIPs of a fit directory over a tolerance grid.

    Spike-and-slab fits also carry analytical PIPs.
    """
    repository = DrawsRepository(directory)
    draws = repository.load()
    prior = repository.load_prior()
    snp_ids = draws.snp_ids
    if prior is None or not snp_ids:
        raise DataValidationError(f"{directory} holds a fit without SNP effects")
    spike_slab = prior if isinstance(prior, SpikeSlab) else None
    table = build_pip_table(
        prior.name,
        snp_ids,
        draws.beta_draws(),
        epsilons,
        gamma_draws=draws.flat("gamma") if spike_slab else None,
        spec=spike_slab,
        omega_cl=draws.flat("omega[cl]"),
    )
    table.metadata["fit"] = str(directory)
    return table


def fit_truth(directory: Path, override: Path | None) -> TruthLabels | None:
    """Truth labels for a fit: the override file, else the one recorded at fit time."""
    if override is not None:
        return read_truth(override)
    recorded = ManifestRepository(directory).load().config.get("truth_path")
    if recorded and Path(recorded).is_file():
        return read_truth(Path(recorded))
    return None
