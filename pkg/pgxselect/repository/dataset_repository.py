"""CSV/JSON persistence of datasets and their truth labels."""

import json
import logging
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from pgxselect.exceptions import DataValidationError
from pgxselect.schemas.dataset_schema import Dataset, Observation, SubjectRecord
from pgxselect.schemas.run_schema import TruthLabels

logger = logging.getLogger(__name__)

OBSERVATION_COLUMNS = ["subject_id", "occasion", "time_h", "dose", "concentration"]
OBSERVATIONS_NAME = "observations.csv"
SNPS_NAME = "snps.csv"
TRUTH_NAME = "truth.json"


def read_table(path: Path) -> pd.DataFrame:
    """Read a CSV with string subject ids; parse failures become validation errors."""
    if not path.is_file():
        raise DataValidationError(f"file not found: {path}")
    try:
        return pd.read_csv(path, dtype={"subject_id": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataValidationError(f"cannot parse {path}: {exc}") from exc


def read_dataset(
    observations_path: Path, snps_path: Path, dose_interval_h: float = 12.0
) -> Dataset:
    """Load observations and genotypes into a validated ``Dataset``.

    Subjects keep the order of their first observation; the SNP table must
    hold exactly one row per observed subject.

    Raises:
        DataValidationError: On missing files, columns or subjects, or any
            schema violation
    """
    observations = read_table(observations_path)
    missing = [c for c in OBSERVATION_COLUMNS if c not in observations.columns]
    if missing:
        raise DataValidationError(f"{observations_path}: missing columns {missing}")
    snps = read_table(snps_path)
    if "subject_id" not in snps.columns:
        raise DataValidationError(f"{snps_path}: missing column subject_id")
    if snps["subject_id"].duplicated().any():
        raise DataValidationError(f"{snps_path}: duplicated subject ids")

    subject_ids = list(dict.fromkeys(observations["subject_id"]))
    snps = snps.set_index("subject_id")
    absent = [sid for sid in subject_ids if sid not in snps.index]
    extra = [sid for sid in snps.index if sid not in set(subject_ids)]
    if absent or extra:
        raise DataValidationError(
            f"subjects differ between files: no genotypes for {absent[:5]}, "
            f"no observations for {extra[:5]}"
        )

    try:
        subjects = []
        for sid, rows in observations.groupby("subject_id", sort=False):
            doses = rows["dose"].unique()
            if len(doses) != 1:
                raise DataValidationError(f"subject {sid}: more than one dose")
            subjects.append(
                SubjectRecord(
                    id=str(sid),
                    dose=float(doses[0]),
                    observations=[
                        Observation(
                            occasion=int(row.occasion),
                            time_h=float(row.time_h),
                            concentration=float(row.concentration),
                        )
                        for row in rows.itertuples(index=False)
                    ],
                )
            )
        dataset = Dataset(
            subjects=subjects,
            snp_matrix=snps.loc[subject_ids].to_numpy(),
            snp_ids=[str(c) for c in snps.columns],
            dose_interval_h=dose_interval_h,
        )
    except (ValidationError, ValueError, TypeError) as exc:
        raise DataValidationError(
            f"invalid dataset {observations_path}: {exc}"
        ) from exc
    logger.info(
        "Loaded dataset",
        extra={
            "observations_path": str(observations_path),
            "n_subjects": dataset.n_subjects,
            "n_snps": dataset.n_snps,
        },
    )
    return dataset


def read_truth(path: Path) -> TruthLabels:
    """Parse a truth JSON file ``{"hypothesis": ..., "causal": {rsID: beta}}``."""
    if not path.is_file():
        raise DataValidationError(f"file not found: {path}")
    try:
        return TruthLabels.model_validate(json.loads(path.read_text()))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise DataValidationError(f"invalid truth file {path}: {exc}") from exc


class DatasetRepository:
    """Dataset files in one directory: observations, SNPs and truth labels."""

    def __init__(self, directory: Path):
        """Initialize repository.

        Args:
            directory: Directory holding the dataset files
        """
        self.directory = directory

    @property
    def observations_path(self) -> Path:
        return self.directory / OBSERVATIONS_NAME

    @property
    def snps_path(self) -> Path:
        return self.directory / SNPS_NAME

    @property
    def truth_path(self) -> Path:
        return self.directory / TRUTH_NAME

    def save(self, dataset: Dataset, truth: TruthLabels | None = None) -> list[Path]:
        """Write the dataset and optional truth labels.

        Args:
            dataset: Dataset to write
            truth: True causal effects of a simulated dataset

        Returns:
            Written paths
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        dataset.observation_frame().to_csv(self.observations_path, index=False)
        snps = pd.DataFrame(dataset.snp_matrix, columns=dataset.snp_ids)
        snps.insert(0, "subject_id", dataset.subject_ids)
        snps.to_csv(self.snps_path, index=False)
        written = [self.observations_path, self.snps_path]
        if truth is not None:
            self.truth_path.write_text(truth.model_dump_json(indent=2) + "\n")
            written.append(self.truth_path)
        logger.debug("Wrote dataset to %s", self.directory)
        return written

    def load(self, dose_interval_h: float = 12.0) -> Dataset:
        return read_dataset(self.observations_path, self.snps_path, dose_interval_h)

    def load_truth(self) -> TruthLabels:
        return read_truth(self.truth_path)
