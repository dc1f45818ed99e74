"""Abstention thresholds for question answering with finite-sample Type I error control.

A certainty score (negative vanilla, semantic or kernel-language entropy) is
computed for each question/answer pair; a threshold calibrated on pairs known
to be answered wrongly decides when the model may answer.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .calibration import (
    CertaintyPredictor,
    Decision,
    binomial_tail_v,
    calibrate,
    predict,
    select_k_hat,
    threshold_sweep,
)
from .errors import CertcalError, InvalidInputError, NumericError, ParseError
from .evaluation import EvaluationReport, evaluate, fpr_alpha_curve
from .scores import (
    AnswerSample,
    CertaintyScore,
    ScoreFunction,
    SemanticKernel,
    kernel_language_entropy,
    normalize_kernel,
    score_record,
    semantic_entropy,
    vanilla_entropy,
)
from .shift import ShiftConfig, calibrate_under_shift, clip_bound_b, rejection_sample

__all__ = [
    "KERNEL_BACKEND",
    "AnswerSample",
    "CertaintyPredictor",
    "CertaintyScore",
    "CertcalError",
    "Decision",
    "EvaluationReport",
    "InvalidInputError",
    "NumericError",
    "ParseError",
    "ScoreFunction",
    "SemanticKernel",
    "ShiftConfig",
    "binomial_tail_v",
    "calibrate",
    "calibrate_under_shift",
    "clip_bound_b",
    "evaluate",
    "fpr_alpha_curve",
    "kernel_language_entropy",
    "normalize_kernel",
    "predict",
    "rejection_sample",
    "score_record",
    "select_k_hat",
    "semantic_entropy",
    "threshold_sweep",
    "vanilla_entropy",
]
