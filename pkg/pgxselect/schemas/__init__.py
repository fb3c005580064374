"""Pydantic schemas for configuration, inputs and reports."""

from pgxselect.schemas.dataset_schema import Dataset, Observation, SubjectRecord
from pgxselect.schemas.prior_schema import (
    PRIOR_CLASSES,
    PRIOR_PRESETS,
    R2D2,
    HierLasso,
    L1Ball,
    PkPriorConfig,
    PriorSpec,
    RegHorseshoe,
    SpikeSlab,
    preset_prior,
    prior_from_json,
    prior_to_json,
)
from pgxselect.schemas.run_schema import (
    CalibrationResult,
    CalibrationTarget,
    EffectiveSizeSummary,
    PriorSummaryTable,
    SamplerConfig,
    SimulationConfig,
    TruthLabels,
)
