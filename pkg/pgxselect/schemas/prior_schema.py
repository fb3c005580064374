"""Pydantic schemas for sparsity priors and population PK priors."""

import math
from collections.abc import Mapping
from typing import Any, ClassVar, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

PriorName = Literal["spike_slab", "l1_ball", "hier_lasso", "reg_horseshoe", "r2d2"]
PresetName = Literal["simulation", "real_data"]


class _PriorBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: ClassVar[PriorName]


class SpikeSlab(_PriorBase):
    """Two-Gaussian mixture with a Beta prior on the inclusion probability."""

    name: ClassVar[PriorName] = "spike_slab"

    sigma_spike: float = Field(default=0.001, gt=0, description="Spike SD (x omega_CL)")
    sigma_slab: float = Field(default=0.3, gt=0, description="Slab SD (x omega_CL)")
    gamma_a: float = Field(default=2.0, gt=0, description="Beta shape a of gamma")
    gamma_b: float = Field(default=70.0, gt=0, description="Beta shape b of gamma")

    @model_validator(mode="after")
    def _spike_below_slab(self) -> "SpikeSlab":
        if self.sigma_spike >= self.sigma_slab:
            raise ValueError("sigma_spike must be smaller than sigma_slab")
        return self


class L1Ball(_PriorBase):
    """Laplace latent vector projected onto an l1 ball of Exponential radius."""

    name: ClassVar[PriorName] = "l1_ball"

    b_xi: float = Field(default=0.30, gt=0, description="Laplace scale (x omega_CL)")
    lambda_r: float = Field(default=1.6, gt=0, description="Radius rate (/ omega_CL)")


class HierLasso(_PriorBase):
    """Gaussian scale mixture with Exponential local scales."""

    name: ClassVar[PriorName] = "hier_lasso"

    tau0: float = Field(default=0.35, gt=0, description="Global scale (x omega_CL)")
    rho: float = Field(default=70.0, gt=0, description="Exponential rate of lambda_j")


class RegHorseshoe(_PriorBase):
    """Horseshoe with a finite slab capping large effects."""

    name: ClassVar[PriorName] = "reg_horseshoe"

    tau0: float = Field(default=0.01, gt=0, description="Global scale (x omega_CL)")
    nu_global: float = Field(default=1.0, gt=0, description="Global half-t dof")
    nu_local: float = Field(default=1.0, gt=0, description="Local half-t dof")
    slab_sd: float = Field(default=0.3, gt=0, description="Slab scale (x omega_CL)")
    nu_slab: float = Field(default=1.0, gt=0, description="Slab inverse-gamma dof")


class R2D2(_PriorBase):
    """Beta prior on R-squared split across SNPs by a Dirichlet simplex."""

    name: ClassVar[PriorName] = "r2d2"

    a: float = Field(default=3.5, gt=0, description="Beta shape a of R2")
    b: float = Field(default=397.0, gt=0, description="Beta shape b of R2")
    alpha: float = Field(default=7.0, gt=0, description="Dirichlet total concentration")


PriorSpec = SpikeSlab | L1Ball | HierLasso | RegHorseshoe | R2D2

PRIOR_CLASSES: dict[str, type[_PriorBase]] = {
    cls.name: cls for cls in (SpikeSlab, L1Ball, HierLasso, RegHorseshoe, R2D2)
}

PRIOR_PRESETS: dict[str, dict[str, PriorSpec]] = {
    "simulation": {
        "spike_slab": SpikeSlab(),
        "l1_ball": L1Ball(),
        "hier_lasso": HierLasso(),
        "reg_horseshoe": RegHorseshoe(),
        "r2d2": R2D2(),
    },
    "real_data": {
        "spike_slab": SpikeSlab(sigma_spike=0.001, sigma_slab=0.2),
        "l1_ball": L1Ball(b_xi=0.12, lambda_r=3.0),
        "hier_lasso": HierLasso(tau0=0.5, rho=45.0),
        "reg_horseshoe": RegHorseshoe(tau0=0.025),
        "r2d2": R2D2(a=2.0, b=30.0, alpha=4.0),
    },
}


def preset_prior(name: str, preset: PresetName = "simulation") -> PriorSpec:
    """Look up a named hyperparameter preset.

    Args:
        name: Prior name (``spike_slab``, ``l1_ball``, ...)
        preset: ``simulation`` or ``real_data``

    Returns:
        The preset prior specification
    """
    if name not in PRIOR_CLASSES:
        raise ValueError(
            f"unknown prior {name!r}; expected one of {sorted(PRIOR_CLASSES)}"
        )
    return PRIOR_PRESETS[preset][name]


def prior_to_json(spec: PriorSpec) -> dict[str, dict[str, float]]:
    """Serialize a prior as a JSON object keyed by its name."""
    return {spec.name: spec.model_dump()}


def prior_from_json(data: Mapping[str, Any]) -> PriorSpec:
    """Parse a JSON object keyed by prior name.

    Args:
        data: Mapping with exactly one key naming the prior

    Returns:
        Validated prior specification
    """
    if len(data) != 1:
        raise ValueError("prior JSON must contain exactly one prior name key")
    name, fields = next(iter(data.items()))
    if name not in PRIOR_CLASSES:
        raise ValueError(
            f"unknown prior {name!r}; expected one of {sorted(PRIOR_CLASSES)}"
        )
    spec = PRIOR_CLASSES[name].model_validate(fields or {})
    return spec  # type: ignore[return-value]


class PkPriorConfig(BaseModel):
    """Hyperparameters of the population PK priors."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu_means: tuple[float, float, float] = Field(
        default=(0.01, 0.9, 5.3),
        description="Prior means of (log ka, log CL, log V)",
    )
    mu_sd: float = Field(default=0.25, gt=0, description="Prior SD of the mu's")
    log_sigma_mean: float = Field(
        default=math.log(0.1), description="Mean of log residual SD"
    )
    log_sigma_sd: float = Field(default=1.0, gt=0, description="SD of log residual SD")
    omega_scale: float = Field(
        default=1.0, gt=0, description="Half-normal scale of inter-individual SDs"
    )
    psi_scale: float = Field(
        default=0.5, gt=0, description="Half-normal scale of the between-occasion SD"
    )
