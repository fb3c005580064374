"""``simulate``: synthetic H0/H1 replicate datasets."""

import argparse
import logging
from pathlib import Path

from pgxselect.commands.common import command_config, load_model, resolve_jobs
from pgxselect.config import Settings
from pgxselect.exceptions import DataValidationError
from pgxselect.repository.dataset_repository import DatasetRepository
from pgxselect.repository.manifest_repository import ManifestRepository
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.schemas.run_schema import SimulationConfig
from pgxselect.simulate import generate_replicates

logger = logging.getLogger(__name__)


def dataset_directory(out: Path, index: int) -> Path:
    return out / f"dataset_{index:03d}"


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser(
        "simulate", help="Simulate replicate datasets under H0 or H1"
    )
    parser.add_argument("--hypothesis", choices=["h0", "h1"], required=True)
    parser.add_argument("--n-datasets", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--config", type=Path, default=None, help="SimulationConfig JSON file"
    )
    parser.add_argument("--n-subjects", type=int, default=None)
    parser.add_argument("--n-snps", type=int, default=None)
    parser.add_argument(
        "--effect", type=float, default=None, help="True effect of the causal SNP"
    )
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Write ``dataset_NNN/`` directories and a manifest under ``--out``."""
    config = load_model(SimulationConfig, args.config)
    overrides = {
        key: value
        for key, value in {
            "n_subjects": args.n_subjects,
            "n_snps": args.n_snps,
            "causal_effect": args.effect,
        }.items()
        if value is not None
    }
    if overrides:
        config = SimulationConfig.model_validate({**config.model_dump(), **overrides})
    if args.n_datasets < 1:
        raise DataValidationError("--n-datasets must be at least 1")

    replicates = generate_replicates(
        args.hypothesis,
        config,
        args.n_datasets,
        args.seed,
        jobs=resolve_jobs(args, settings),
    )
    outputs: list[str] = []
    for k, (dataset, truth) in enumerate(replicates):
        paths = DatasetRepository(dataset_directory(args.out, k)).save(dataset, truth)
        outputs += [str(path.relative_to(args.out)) for path in paths]

    ManifestRepository(args.out).save(
        RunManifest(
            command="simulate",
            argv=args.argv,
            inputs={},
            config={
                **command_config(args),
                "simulation": config.model_dump(mode="json"),
            },
            seeds={"simulate": args.seed},
            outputs=outputs,
            results={"n_datasets": len(replicates)},
        )
    )
    logger.info(
        "Simulated datasets",
        extra={
            "hypothesis": args.hypothesis,
            "n_datasets": len(replicates),
            "out": str(args.out),
        },
    )
    return 0
