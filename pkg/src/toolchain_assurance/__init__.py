"""Quantitative toolchain assurance cases built as process reductions.

Hypotheses carry independent Beta-distributed variables. The strength of a
reduction is the mean of the conjunction of the controlled hypotheses and
its confidence is the variance.
"""

from toolchain_assurance.bayes import (
    Evidence,
    GroundTruth,
    SanitizerObservation,
    Verdict,
    posterior,
    sanitizer_update,
)
from toolchain_assurance.beta_logic import (
    FALSE,
    NO_EVIDENCE,
    TRUE,
    BetaParams,
    Moments,
    and_,
    fold_and,
    moments_of,
    not_,
    or_,
    params_from_moments,
)
from toolchain_assurance.case import (
    AssuranceCase,
    Classification,
    HypothesisNode,
    ReductionReport,
    evaluate_strength,
    load_case,
    reclassify,
)
from toolchain_assurance.completeness import (
    FrozenAssessment,
    SystemState,
    Unit,
    UBInstance,
    fixed_point,
    freeze,
    step,
)
from toolchain_assurance.ledger import OptLevel, Stage, TrialEvent, TrialLedger, replay

__version__ = "0.1.0"

__all__ = [
    "AssuranceCase",
    "BetaParams",
    "Classification",
    "Evidence",
    "FALSE",
    "FrozenAssessment",
    "GroundTruth",
    "HypothesisNode",
    "Moments",
    "NO_EVIDENCE",
    "OptLevel",
    "ReductionReport",
    "SanitizerObservation",
    "Stage",
    "SystemState",
    "TRUE",
    "TrialEvent",
    "TrialLedger",
    "UBInstance",
    "Unit",
    "Verdict",
    "and_",
    "evaluate_strength",
    "fixed_point",
    "fold_and",
    "freeze",
    "load_case",
    "moments_of",
    "not_",
    "or_",
    "params_from_moments",
    "posterior",
    "reclassify",
    "replay",
    "sanitizer_update",
    "step",
]
