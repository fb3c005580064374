"""``fit``: NUTS posterior of the PK model under one sparsity prior."""

import argparse
import logging
import time
from pathlib import Path

from pgxselect.commands.common import (
    NO_PRIOR,
    command_config,
    load_model,
    load_prior,
    resolve_jobs,
)
from pgxselect.config import Settings
from pgxselect.exceptions import ConvergenceError
from pgxselect.metrics import EPSILON_GRID, build_pip_table, effect_summary, pip_curves
from pgxselect.model.posterior import PosteriorModel
from pgxselect.repository.dataset_repository import TRUTH_NAME, read_dataset
from pgxselect.repository.draws_repository import DrawsRepository
from pgxselect.repository.manifest_repository import ManifestRepository, hash_inputs
from pgxselect.sampler.runner import PosteriorDraws, sample_chains
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.schemas.prior_schema import PRIOR_CLASSES, PkPriorConfig, SpikeSlab
from pgxselect.schemas.run_schema import SamplerConfig
from pgxselect.telemetry import fit_duration

logger = logging.getLogger(__name__)

PIP_NAME = "pip.csv"
EFFECTS_NAME = "effects.csv"
PIP_CURVES_NAME = "pip_curves.csv"
PK_PARAMETER_PREFIXES = ("mu[", "omega[", "sigma", "psi_cl")


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser("fit", help="Sample the posterior of one dataset")
    parser.add_argument("--data", type=Path, required=True, help="observations.csv")
    parser.add_argument("--snps", type=Path, required=True, help="snps.csv")
    parser.add_argument(
        "--prior", choices=[*sorted(PRIOR_CLASSES), NO_PRIOR], required=True
    )
    parser.add_argument("--prior-config", type=Path, default=None)
    parser.add_argument(
        "--preset", choices=["simulation", "real_data"], default="simulation"
    )
    parser.add_argument(
        "--pk-prior", type=Path, default=None, help="PkPriorConfig JSON"
    )
    parser.add_argument("--chains", type=int, default=5)
    parser.add_argument("--warmup", type=int, default=1000)
    parser.add_argument("--samples", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target-accept", type=float, default=0.8)
    parser.add_argument("--max-tree-depth", type=int, default=10)
    parser.add_argument(
        "--step-size",
        type=float,
        default=None,
        help="Fixed step size; disables warm-up adaptation",
    )
    parser.add_argument("--occasions", choices=["on", "off"], default="off")
    parser.add_argument("--dose-interval", type=float, default=12.0)
    parser.add_argument(
        "--strict",
        action="store_true",
        help="Exit with status 3 when any split R-hat exceeds the threshold",
    )
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def pk_parameter_names(draws: PosteriorDraws) -> list[str]:
    return [name for name in draws.names if name.startswith(PK_PARAMETER_PREFIXES)]


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Sample, then write draws, summaries, PIPs and the manifest.

    With ``--strict`` the artifacts are still written before the
    convergence check raises.
    """
    dataset = read_dataset(args.data, args.snps, args.dose_interval)
    prior = load_prior(args.prior, args.prior_config, args.preset)
    pk_prior = load_model(PkPriorConfig, args.pk_prior)
    sampler = SamplerConfig(
        n_chains=args.chains,
        n_warmup=args.warmup,
        n_samples=args.samples,
        seed=args.seed,
        target_accept=args.target_accept,
        max_tree_depth=args.max_tree_depth,
        step_size=args.step_size,
    )
    model = PosteriorModel(dataset, prior, pk_prior, occasions=args.occasions == "on")
    labels = {"prior": args.prior}

    started = time.perf_counter()
    draws = sample_chains(
        model, sampler, jobs=resolve_jobs(args, settings), attributes=labels
    )
    elapsed = time.perf_counter() - started
    fit_duration.record(elapsed, labels)

    repository = DrawsRepository(args.out)
    written = repository.save(draws, prior)
    if prior is not None:
        spike_slab = prior if isinstance(prior, SpikeSlab) else None
        table = build_pip_table(
            prior.name,
            draws.snp_ids,
            draws.beta_draws(),
            EPSILON_GRID,
            gamma_draws=draws.flat("gamma") if spike_slab else None,
            spec=spike_slab,
            omega_cl=draws.flat("omega[cl]"),
        )
        table.to_frame().to_csv(args.out / PIP_NAME, index=False)
        pip_curves(table).to_csv(args.out / PIP_CURVES_NAME, index=False)
        effect_summary(draws.snp_ids, draws.beta_draws()).to_csv(
            args.out / EFFECTS_NAME, index=False
        )
        written += [
            args.out / name for name in (PIP_NAME, PIP_CURVES_NAME, EFFECTS_NAME)
        ]

    worst = draws.worst_rhat()
    worst_pk = draws.worst_rhat(pk_parameter_names(draws))
    truth_path = args.data.parent / TRUTH_NAME
    inputs = [args.data, args.snps]
    inputs += [path for path in (args.prior_config, args.pk_prior) if path is not None]
    ManifestRepository(args.out).save(
        RunManifest(
            command="fit",
            argv=args.argv,
            inputs=hash_inputs(inputs),
            config={
                **command_config(args),
                "sampler": sampler.model_dump(mode="json"),
                "prior_name": args.prior,
                "pk_prior": pk_prior.model_dump(mode="json"),
                "truth_path": str(truth_path) if truth_path.is_file() else None,
            },
            seeds={"sampler": args.seed},
            outputs=[str(path.relative_to(args.out)) for path in written],
            results={
                "divergences": draws.n_divergent,
                "worst_rhat": worst,
                "worst_pk_rhat": worst_pk,
                "step_sizes": draws.step_sizes.tolist(),
                "seconds": elapsed,
            },
        )
    )
    logger.info(
        "Fit complete",
        extra={
            "prior": args.prior,
            "worst_rhat": worst,
            "divergences": draws.n_divergent,
            "seconds": round(elapsed, 2),
        },
    )
    if args.strict and worst > settings.strict_rhat_threshold:
        raise ConvergenceError(worst, settings.strict_rhat_threshold)
    return 0
