"""``calibrate``: closed-form hyperparameters and the prior Monte Carlo check."""

import argparse
import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import pandas as pd

from pgxselect.calibration import (
    MIN_PRIOR_DRAWS,
    calibrate_global_scale,
    calibrate_sparsity,
    l1ball_active_tail,
    l1ball_expected_k,
    prior_mc_summary,
    ss_expected_k,
)
from pgxselect.commands.common import (
    command_config,
    load_model,
    load_prior,
    resolve_jobs,
)
from pgxselect.config import Settings
from pgxselect.exceptions import DataValidationError
from pgxselect.repository.manifest_repository import ManifestRepository, hash_inputs
from pgxselect.schemas.manifest_schema import RunManifest
from pgxselect.schemas.prior_schema import (
    PRIOR_CLASSES,
    L1Ball,
    PriorSpec,
    RegHorseshoe,
    SpikeSlab,
    prior_to_json,
)
from pgxselect.schemas.run_schema import CalibrationResult, CalibrationTarget

logger = logging.getLogger(__name__)

SUMMARY_NAME = "prior_summary.csv"
PRIOR_NAME = "prior.json"
CALIBRATION_NAME = "calibration.json"


def register(subparsers: argparse._SubParsersAction) -> None:  # type: ignore[type-arg]
    parser = subparsers.add_parser(
        "calibrate", help="Calibrate prior hyperparameters and tabulate prior draws"
    )
    parser.add_argument("--prior", choices=sorted(PRIOR_CLASSES), required=True)
    parser.add_argument("--n-draws", type=int, default=200_000)
    parser.add_argument(
        "--config", type=Path, default=None, help="Prior hyperparameter JSON file"
    )
    parser.add_argument(
        "--preset", choices=["simulation", "real_data"], default="simulation"
    )
    parser.add_argument(
        "--target", type=Path, default=None, help="CalibrationTarget JSON file"
    )
    parser.add_argument(
        "--omega", type=float, default=None, help="Reference omega_CL (default 0.3)"
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, required=True)
    parser.set_defaults(func=run)


def closed_form(spec: PriorSpec, target: CalibrationTarget) -> dict[str, Any]:
    """Calibrated hyperparameters for the target, plus what the current ones imply."""
    implied: dict[str, float] = {}
    result: CalibrationResult
    if isinstance(spec, SpikeSlab):
        result = calibrate_sparsity("spike_slab", target, gamma_a=spec.gamma_a)
        implied["expected_k"] = ss_expected_k(target.n_snps, spec.gamma_a, spec.gamma_b)
    elif isinstance(spec, L1Ball):
        result = calibrate_sparsity("l1_ball", target, b_xi=spec.b_xi)
        implied["expected_k"] = l1ball_expected_k(spec.lambda_r, spec.b_xi)
        implied["p_active_above_target"] = l1ball_active_tail(
            target.target_effect, spec.b_xi, target.reference_omega
        )
    elif isinstance(spec, RegHorseshoe):
        result = calibrate_global_scale("reg_horseshoe", target, spec.slab_sd)
    else:
        result = calibrate_global_scale(spec.name, target)  # type: ignore[arg-type]
    return {
        "prior": spec.name,
        "target": target.model_dump(),
        "calibrated": result.model_dump(),
        "implied_by_current": implied,
    }


def calibrated_prior(
    spec: PriorSpec, hyperparameters: Mapping[str, float]
) -> PriorSpec:
    """The prior with its calibrated hyperparameters substituted.

    Calibration outputs that are not fields of the prior (``b`` of the
    horseshoe, ``mean_r2``) are left out.
    """
    fields = type(spec).model_fields
    updates = {key: value for key, value in hyperparameters.items() if key in fields}
    return type(spec).model_validate({**spec.model_dump(), **updates})


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Write the prior summary table, prior JSON and calibration block."""
    spec = load_prior(args.prior, args.config, args.preset)
    if spec is None:
        raise DataValidationError("calibrate needs a sparsity prior")
    target = load_model(CalibrationTarget, args.target)
    omega = args.omega if args.omega is not None else target.reference_omega

    summary = prior_mc_summary(
        spec,
        omega,
        args.n_draws,
        args.seed,
        n_snps=target.n_snps,
        n_subjects=target.n_subjects,
        target_effect=target.target_effect,
        jobs=resolve_jobs(args, settings),
    )
    if summary.magnitude_flag:
        logger.warning(
            "Prior mass above the target effect is outside the guidance band",
            extra={"prior": spec.name, "p_above_target": summary.p_above_target},
        )

    args.out.mkdir(parents=True, exist_ok=True)
    row = {**summary.as_row(), "magnitude_flag": summary.magnitude_flag}
    pd.DataFrame([row]).to_csv(args.out / SUMMARY_NAME, index=False)
    calibration = closed_form(spec, target)
    calibrated = calibrated_prior(spec, calibration["calibrated"]["hyperparameters"])
    (args.out / PRIOR_NAME).write_text(
        json.dumps(prior_to_json(calibrated), indent=2) + "\n"
    )
    (args.out / CALIBRATION_NAME).write_text(json.dumps(calibration, indent=2) + "\n")

    inputs = [path for path in (args.config, args.target) if path is not None]
    ManifestRepository(args.out).save(
        RunManifest(
            command="calibrate",
            argv=args.argv,
            inputs=hash_inputs(inputs),
            config={
                **command_config(args),
                "prior": prior_to_json(spec),
                "calibrated_prior": prior_to_json(calibrated),
            },
            seeds={"prior_mc": args.seed},
            outputs=[SUMMARY_NAME, PRIOR_NAME, CALIBRATION_NAME],
            results={
                "p_below_1e3": summary.p_below_1e3,
                "p_above_1e1": summary.p_above_1e1,
                "p_above_target": summary.p_above_target,
                "magnitude_flag": summary.magnitude_flag,
                "min_draws": MIN_PRIOR_DRAWS,
            },
        )
    )
    logger.info("Calibrated prior", extra={"prior": spec.name, "out": str(args.out)})
    return 0
