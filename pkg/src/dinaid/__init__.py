"""Identifiability checks, estimation and non-identifiability witnesses for
the DINA cognitive diagnosis model."""

from dinaid.em import EMConfig, EMResult, EmptyClassWarning, block_mse, em_step, fit
from dinaid.experiment import ExperimentReport, ExperimentSpec, run_experiment
from dinaid.model import (
    InvalidParamsError,
    ModelParams,
    ResponseDataset,
    attribute_posterior,
    log_likelihood,
    pattern_probabilities,
    response_pattern_prob,
    simulate,
)
from dinaid.qmatrix import (
    IdentifiabilityReport,
    QMatrix,
    QMatrixParseError,
    identifiability_verdict,
    parse_qmatrix,
    read_qmatrix,
    strip_zero_rows,
)
from dinaid.tmoments import (
    canonical_order,
    distribution_distance,
    empirical_gamma,
    generalized_transform,
    moment_vector,
    t_matrix,
)
from dinaid.witness import WitnessError, WitnessPair, certify_nonidentifiable

__version__ = "0.1.0"

__all__ = [
    "EMConfig",
    "EMResult",
    "EmptyClassWarning",
    "ExperimentReport",
    "ExperimentSpec",
    "IdentifiabilityReport",
    "InvalidParamsError",
    "ModelParams",
    "QMatrix",
    "QMatrixParseError",
    "ResponseDataset",
    "WitnessError",
    "WitnessPair",
    "attribute_posterior",
    "block_mse",
    "canonical_order",
    "certify_nonidentifiable",
    "distribution_distance",
    "em_step",
    "empirical_gamma",
    "fit",
    "generalized_transform",
    "identifiability_verdict",
    "log_likelihood",
    "moment_vector",
    "parse_qmatrix",
    "pattern_probabilities",
    "read_qmatrix",
    "response_pattern_prob",
    "run_experiment",
    "simulate",
    "strip_zero_rows",
    "t_matrix",
]
