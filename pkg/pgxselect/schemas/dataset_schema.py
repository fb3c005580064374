"""Pydantic schemas for PK observations and genotypes."""

import math
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Observation(BaseModel):
    """One concentration measurement."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    occasion: int = Field(default=1, ge=0, description="Sampling occasion label")
    time_h: float = Field(..., gt=0, description="Hours since the last dose")
    concentration: float = Field(..., ge=0, description="Observed concentration")

    @field_validator("concentration", "time_h")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value


class SubjectRecord(BaseModel):
    """Dosing and sampling record of one subject."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(..., min_length=1, description="Subject identifier")
    dose: float = Field(..., ge=0, description="Dose amount per interval")
    observations: list[Observation] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _contiguous_occasions(self) -> "SubjectRecord":
        labels = {obs.occasion for obs in self.observations}
        if max(labels) - min(labels) + 1 != len(labels):
            raise ValueError(
                f"subject {self.id}: occasion labels {sorted(labels)} "
                "are not contiguous"
            )
        return self

    @property
    def occasions(self) -> list[int]:
        """Sorted distinct occasion labels."""
        return sorted({obs.occasion for obs in self.observations})


class Dataset(BaseModel):
    """Subjects with steady-state PK samples and raw SNP allele counts."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    subjects: list[SubjectRecord] = Field(..., min_length=1)
    snp_matrix: np.ndarray = Field(  # type: ignore[type-arg]
        ..., description="N x p minor-allele counts in {0, 1, 2}"
    )
    snp_ids: list[str] = Field(..., description="SNP labels, one per column")
    dose_interval_h: float = Field(default=12.0, gt=0, description="Dosing interval")

    @field_validator("snp_matrix", mode="before")
    @classmethod
    def _as_count_matrix(cls, value: Any) -> NDArray[np.int64]:
        matrix = np.asarray(value)
        if matrix.ndim != 2:
            raise ValueError("snp_matrix must be two-dimensional")
        if matrix.size and not np.all(np.isin(matrix, (0, 1, 2))):
            raise ValueError("snp_matrix entries must be allele counts 0, 1 or 2")
        return matrix.astype(np.int64)

    @model_validator(mode="after")
    def _consistent_shapes(self) -> "Dataset":
        n_rows, n_cols = self.snp_matrix.shape
        if n_rows != len(self.subjects):
            raise ValueError(
                f"snp_matrix has {n_rows} rows for {len(self.subjects)} subjects"
            )
        if n_cols != len(self.snp_ids):
            raise ValueError(
                f"snp_matrix has {n_cols} columns for {len(self.snp_ids)} ids"
            )
        if len(set(self.snp_ids)) != len(self.snp_ids):
            raise ValueError("snp_ids must be unique")
        ids = [subject.id for subject in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")
        return self

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_snps(self) -> int:
        return len(self.snp_ids)

    @property
    def subject_ids(self) -> list[str]:
        return [subject.id for subject in self.subjects]

    def observation_frame(self) -> pd.DataFrame:
        """Flatten observations into the long table used on disk.

        Returns:
            DataFrame with columns subject_id, occasion, time_h, dose, concentration
        """
        rows = [
            (subject.id, obs.occasion, obs.time_h, subject.dose, obs.concentration)
            for subject in self.subjects
            for obs in subject.observations
        ]
        return pd.DataFrame(
            rows,
            columns=["subject_id", "occasion", "time_h", "dose", "concentration"],
        )

    def select_snps(self, snp_ids: list[str]) -> "Dataset":
        """Return a copy restricted to the given SNP columns, in that order."""
        index = {snp: j for j, snp in enumerate(self.snp_ids)}
        missing = [snp for snp in snp_ids if snp not in index]
        if missing:
            raise ValueError(f"unknown SNP ids: {missing}")
        columns = [index[snp] for snp in snp_ids]
        return Dataset(
            subjects=self.subjects,
            snp_matrix=self.snp_matrix[:, columns],
            snp_ids=list(snp_ids),
            dose_interval_h=self.dose_interval_h,
        )
