"""Unit tests for dataset, draws and manifest persistence."""

import hashlib
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from pgxselect.exceptions import DataValidationError
from pgxselect.repository.dataset_repository import (
    DatasetRepository,
    read_dataset,
    read_truth,
)
from pgxselect.repository.draws_repository import DrawsRepository
from pgxselect.repository.manifest_repository import (
    ManifestRepository,
    file_sha256,
    hash_inputs,
)
from pgxselect.sampler.runner import STAT_NAMES, PosteriorDraws
from pgxselect.schemas.dataset_schema import Dataset
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.schemas.prior_schema import L1Ball
from pgxselect.schemas.run_schema import SamplerConfig, TruthLabels


@pytest.fixture
def posterior_draws(rng: np.random.Generator) -> PosteriorDraws:
    """Two short chains over two effects and a scale."""
    names = ["beta[rs1]", "beta[rs2]", "sigma"]
    stats = {name: rng.uniform(size=(2, 20)) for name in STAT_NAMES}
    stats["divergent"] = np.zeros((2, 20))
    stats["divergent"][1, 3] = 1.0
    return PosteriorDraws(
        names=names,
        draws=rng.normal(size=(2, 20, 3)),
        stats=stats,
        step_sizes=np.array([0.3, 0.4]),
        inv_mass_diags=np.ones((2, 5)),
        config=SamplerConfig(n_chains=2, n_warmup=10, n_samples=20),
    )


def save_fit(
    directory: Path, draws: PosteriorDraws, prior: L1Ball | None = None
) -> None:
    DrawsRepository(directory).save(draws, prior)
    ManifestRepository(directory).save(
        RunManifest(
            command="fit",
            config={
                "sampler": draws.config.model_dump(mode="json"),
                "prior_name": prior.name if prior else "none",
            },
        )
    )


class TestDatasetRepository:
    """Tests for DatasetRepository and read_dataset."""

    def test_save_and_load(
        self, tmp_path: Path, small_study: tuple[Dataset, TruthLabels]
    ) -> None:
        dataset, truth = small_study
        repository = DatasetRepository(tmp_path / "dataset_000")
        written = repository.save(dataset, truth)
        assert [path.name for path in written] == [
            "observations.csv",
            "snps.csv",
            "truth.json",
        ]

        loaded = repository.load()
        assert loaded.subject_ids == dataset.subject_ids
        assert loaded.snp_ids == dataset.snp_ids
        np.testing.assert_array_equal(loaded.snp_matrix, dataset.snp_matrix)
        pd.testing.assert_frame_equal(
            loaded.observation_frame(), dataset.observation_frame()
        )
        assert repository.load_truth() == truth

    def test_subject_ids_stay_strings(self, tmp_path: Path) -> None:
        (tmp_path / "obs.csv").write_text(
            "subject_id,occasion,time_h,dose,concentration\n"
            "007,1,1.0,100,0.5\n"
            "007,1,4.0,100,0.7\n"
        )
        (tmp_path / "snps.csv").write_text("subject_id,rs1\n007,2\n")
        dataset = read_dataset(tmp_path / "obs.csv", tmp_path / "snps.csv")
        assert dataset.subject_ids == ["007"]

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError, match="not found"):
            read_dataset(tmp_path / "obs.csv", tmp_path / "snps.csv")

    def test_missing_columns(self, tmp_path: Path) -> None:
        (tmp_path / "obs.csv").write_text("subject_id,time_h\nA,1.0\n")
        (tmp_path / "snps.csv").write_text("subject_id,rs1\nA,0\n")
        with pytest.raises(DataValidationError, match="missing columns"):
            read_dataset(tmp_path / "obs.csv", tmp_path / "snps.csv")

    def test_subjects_must_match(self, tmp_path: Path) -> None:
        (tmp_path / "obs.csv").write_text(
            "subject_id,occasion,time_h,dose,concentration\nA,1,1.0,100,0.5\n"
        )
        (tmp_path / "snps.csv").write_text("subject_id,rs1\nA,0\nB,1\n")
        with pytest.raises(DataValidationError, match="subjects differ"):
            read_dataset(tmp_path / "obs.csv", tmp_path / "snps.csv")

    def test_schema_violations_become_validation_errors(self, tmp_path: Path) -> None:
        (tmp_path / "obs.csv").write_text(
            "subject_id,occasion,time_h,dose,concentration\nA,1,-1.0,100,0.5\n"
        )
        (tmp_path / "snps.csv").write_text("subject_id,rs1\nA,0\n")
        with pytest.raises(DataValidationError, match="invalid dataset"):
            read_dataset(tmp_path / "obs.csv", tmp_path / "snps.csv")

    def test_malformed_truth(self, tmp_path: Path) -> None:
        path = tmp_path / "truth.json"
        path.write_text('{"hypothesis": "h2"}')
        with pytest.raises(DataValidationError):
            read_truth(path)


class TestDrawsRepository:
    """Tests for DrawsRepository."""

    def test_chain_files_carry_suffixed_stats(
        self, tmp_path: Path, posterior_draws: PosteriorDraws
    ) -> None:
        save_fit(tmp_path, posterior_draws, L1Ball())
        chain = pd.read_csv(tmp_path / "chain_0.csv")
        assert list(chain.columns[:3]) == ["beta[rs1]", "beta[rs2]", "sigma"]
        assert {f"{name}__" for name in STAT_NAMES} <= set(chain.columns)
        assert len(chain) == 20
        assert (tmp_path / "summary.csv").is_file()
        assert (tmp_path / "adaptation.json").is_file()

    def test_round_trip(
        self, tmp_path: Path, posterior_draws: PosteriorDraws
    ) -> None:
        save_fit(tmp_path, posterior_draws, L1Ball(b_xi=0.2))
        repository = DrawsRepository(tmp_path)
        loaded = repository.load()
        assert loaded.names == posterior_draws.names
        np.testing.assert_allclose(loaded.draws, posterior_draws.draws)
        np.testing.assert_allclose(loaded.step_sizes, [0.3, 0.4])
        assert loaded.n_divergent == 1
        assert loaded.config == posterior_draws.config
        assert loaded.snp_ids == ["rs1", "rs2"]
        assert repository.load_prior() == L1Ball(b_xi=0.2)

    def test_fit_without_prior(
        self, tmp_path: Path, posterior_draws: PosteriorDraws
    ) -> None:
        save_fit(tmp_path, posterior_draws)
        assert DrawsRepository(tmp_path).load_prior() is None

    def test_chains_sorted_numerically(self, tmp_path: Path) -> None:
        for chain in (10, 2, 0):
            (tmp_path / f"chain_{chain}.csv").write_text("x\n1\n")
        paths = DrawsRepository(tmp_path).chain_paths()
        assert [path.name for path in paths] == [
            "chain_0.csv",
            "chain_2.csv",
            "chain_10.csv",
        ]

    def test_empty_directory(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError, match="no chain files"):
            DrawsRepository(tmp_path).load()

    def test_chains_must_agree(
        self, tmp_path: Path, posterior_draws: PosteriorDraws
    ) -> None:
        save_fit(tmp_path, posterior_draws)
        chain = pd.read_csv(tmp_path / "chain_1.csv")
        chain.iloc[:10].to_csv(tmp_path / "chain_1.csv", index=False)
        with pytest.raises(DataValidationError, match="differ in length"):
            DrawsRepository(tmp_path).load()


class TestManifestRepository:
    """Tests for ManifestRepository and input hashing."""

    def test_round_trip(self, tmp_path: Path) -> None:
        manifest = RunManifest(
            command="simulate",
            argv=["simulate", "--hypothesis", "h0"],
            seeds={"simulate": 7},
            outputs=["dataset_000/observations.csv"],
        )
        path = ManifestRepository(tmp_path).save(manifest)
        assert path.name == "manifest.json"
        assert ManifestRepository(tmp_path).load() == manifest

    def test_missing_manifest(self, tmp_path: Path) -> None:
        with pytest.raises(DataValidationError, match="no manifest"):
            ManifestRepository(tmp_path).load()

    def test_malformed_manifest(self, tmp_path: Path) -> None:
        (tmp_path / "manifest.json").write_text('{"argv": []}')
        with pytest.raises(DataValidationError, match="malformed"):
            ManifestRepository(tmp_path).load()

    def test_inputs_are_sha256_digests(self, tmp_path: Path) -> None:
        path = tmp_path / "data.csv"
        path.write_bytes(b"subject_id\nA\n")
        expected = hashlib.sha256(b"subject_id\nA\n").hexdigest()
        assert file_sha256(path) == expected
        assert hash_inputs([path]) == {str(path): expected}
