"""Pydantic schemas for sampler, simulation and calibration configuration."""

import math
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SamplerConfig(BaseModel):
    """NUTS run configuration."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_chains: int = Field(default=5, ge=1, description="Independent chains")
    n_warmup: int = Field(
        default=1000, ge=1, description="Warm-up iterations per chain"
    )
    n_samples: int = Field(default=2000, ge=1, description="Retained draws per chain")
    target_accept: float = Field(
        default=0.8, gt=0, lt=1, description="Dual-averaging acceptance target"
    )
    max_tree_depth: int = Field(default=10, ge=1, description="Maximum tree depth")
    max_energy_error: float = Field(
        default=1000.0, gt=0, description="Energy error that marks a divergence"
    )
    seed: int = Field(default=0, ge=0, description="Root seed for chain streams")
    step_size: float | None = Field(
        default=None,
        gt=0,
        description="Fixed step size; when set, warm-up adaptation is skipped",
    )

    @property
    def adapt(self) -> bool:
        return self.step_size is None


class SimulationConfig(BaseModel):
    """Design of the synthetic PK study."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_subjects: int = Field(default=400, ge=2)
    n_snps: int = Field(default=134, ge=1, description="Leading pool columns to use")
    snp_ids: list[str] | None = Field(
        default=None, description="Explicit pool subset; overrides n_snps"
    )
    dose: float = Field(default=200.0, ge=0)
    times_h: tuple[float, ...] = Field(default=(1.0, 4.0, 12.0))
    dose_interval_h: float = Field(default=12.0, gt=0)
    mu: tuple[float, float, float] = Field(
        default=(math.log(1.0), math.log(2.5), math.log(200.0)),
        description="Population (log ka, log CL, log V)",
    )
    omega: tuple[float, float, float] = Field(default=(0.3, 0.3, 0.3))
    sigma: float = Field(default=0.1, ge=0)
    causal_snp: str = Field(default="rs3745274")
    causal_effect: float = Field(default=-0.13)
    n_occasions: int = Field(default=1, ge=1)
    psi_cl: float = Field(default=0.0, ge=0, description="Between-occasion SD")

    @model_validator(mode="after")
    def _check(self) -> "SimulationConfig":
        if any(t <= 0 for t in self.times_h):
            raise ValueError("sampling times must be positive")
        if any(w < 0 for w in self.omega):
            raise ValueError("omega must be nonnegative")
        return self


class CalibrationTarget(BaseModel):
    """Sparsity and effect-size targets used to set prior hyperparameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_subjects: int = Field(default=400, ge=1)
    n_snps: int = Field(default=134, ge=1)
    target_model_size: float = Field(default=5.0, gt=0)
    target_effect: float = Field(default=0.13, gt=0)
    reference_omega: float = Field(default=0.3, gt=0)

    @model_validator(mode="after")
    def _size_below_p(self) -> "CalibrationTarget":
        if self.target_model_size >= self.n_snps:
            raise ValueError("target_model_size must be smaller than n_snps")
        return self


class CalibrationResult(BaseModel):
    """Closed-form hyperparameters with provenance notes."""

    model_config = ConfigDict(frozen=True)

    prior_kind: str
    hyperparameters: dict[str, float]
    notes: list[str] = Field(default_factory=list)


class EffectiveSizeSummary(BaseModel):
    """Distribution summary of K or m_eff over prior draws."""

    quantity: Literal["K", "m_eff"]
    mean: float
    sd: float
    q05: float
    q50: float
    q95: float


class PriorSummaryTable(BaseModel):
    """Prior probabilities of effect-size regimes for a single coefficient."""

    prior: str
    n_draws: int
    omega_ref: float
    p_below_1e3: float = Field(..., ge=0, le=1)
    p_below_1e2: float = Field(..., ge=0, le=1)
    p_between_1e2_1e1: float = Field(..., ge=0, le=1)
    p_above_1e2: float = Field(..., ge=0, le=1)
    p_above_1e1: float = Field(..., ge=0, le=1)
    p_above_1e1_given_nonzero: float | None = Field(default=None, ge=0, le=1)
    p_spike_above_1e2: float | None = Field(
        default=None, ge=0, le=1, description="P(|beta| > 0.01 | spike), closed form"
    )
    p_above_target: float = Field(..., ge=0, le=1)
    target_effect: float
    effective_size: EffectiveSizeSummary

    @property
    def magnitude_flag(self) -> bool:
        """True when P(|beta| > a) falls outside the [0.15, 0.30] guidance band."""
        return not 0.15 <= self.p_above_target <= 0.30

    def as_row(self) -> dict[str, Any]:
        """Flatten into one CSV row."""
        row = self.model_dump(exclude={"effective_size"})
        row.update(
            {
                f"effective_{key}": value
                for key, value in self.effective_size.model_dump().items()
            }
        )
        return row


class TruthLabels(BaseModel):
    """True causal SNP effects of a simulated dataset."""

    hypothesis: Literal["h0", "h1"] = "h1"
    causal: dict[str, float] = Field(default_factory=dict)

    @property
    def causal_set(self) -> set[str]:
        return set(self.causal)
