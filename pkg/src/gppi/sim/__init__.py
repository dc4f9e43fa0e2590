"""Simulation harness: data-generating processes, predictors, replications."""

from .dgp import (
    SimData,
    dgp_alt,
    dgp_main,
    gen_mvn,
    labeling_design,
    labeling_pi_logistic,
    labeling_pi_main,
)
from .harness import (
    LAMBDA_GRID,
    ReplicationError,
    SimConfig,
    SimSummary,
    run_replications,
    true_value,
)
from .predictors import ExternalColumn, FittedLogistic, Ideal, UniformNoise, make_predictor

__all__ = [name for name in dir() if not name.startswith("_")]
