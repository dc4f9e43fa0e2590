"""Generalized prediction-powered inference for classifier metrics."""

from .errors import (
    AllLabeled,
    DegenerateDenominator,
    InvalidInput,
    InvalidLevel,
    LengthMismatch,
    MissingColumn,
    NoneLabeled,
    NotConverged,
    NotPositiveDefinite,
    OverlapViolation,
    PPIError,
    SchemaMismatch,
    Separation,
    UnsupportedTarget,
)
from .estimands import (
    Estimand,
    Kind,
    WeightedColumns,
    auc_pairwise,
    gateaux_oracle,
    influence_values,
    plugin_estimate,
)
from .rectifier import (
    LabeledUnlabeledData,
    Mode,
    PpiResult,
    estimate_omega,
    ppi_md_form,
    ppi_no_shift,
)
from .shift import (
    LogisticConfig,
    LogisticPiModel,
    ShiftSample,
    Target,
    component_estimates,
    fit_logistic_pi,
    generic_omega,
    ppi_shift,
    ppi_shift_estimated_pi,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
