"""Continuous-score IRT adaptive testing and adaptive multi-model ranking."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationArtifact,
    ContinuousIRTCalibrator,
    ItemParams,
    NormalizationTransform,
    calibrate,
)
from .evaluation import (
    EvalReport,
    GroundTruth,
    MatrixOracle,
    SyntheticConfig,
    bootstrap_ties,
    conformance,
    evaluate,
    fixed_length_cat,
    generate_synthetic,
    ground_truth_ranking,
    kendall_tau,
    tie_metrics,
)
from .irt import (
    binary_fisher_information,
    discrimination_from_noise,
    fisher_information,
    log_likelihood,
    logistic_mean,
    response_variance,
)
from .matrix import ScoreMatrix
from .ranker import (
    AdaptiveRanker,
    FixedLengthRanker,
    ModelSpec,
    RandomBaselineRanker,
    RankerConfig,
    RankingResult,
    pairwise_confidence,
    run_random_baseline,
    run_ranker,
)
from .session import AbilityEstimate, CATSession, ItemBank, PriorSpec, init_session

__all__ = [
    "AbilityEstimate",
    "AdaptiveRanker",
    "CATSession",
    "CalibrationArtifact",
    "ContinuousIRTCalibrator",
    "EvalReport",
    "FixedLengthRanker",
    "GroundTruth",
    "ItemBank",
    "ItemParams",
    "MatrixOracle",
    "ModelSpec",
    "NormalizationTransform",
    "PriorSpec",
    "RandomBaselineRanker",
    "RankerConfig",
    "RankingResult",
    "ScoreMatrix",
    "SyntheticConfig",
    "binary_fisher_information",
    "bootstrap_ties",
    "calibrate",
    "conformance",
    "discrimination_from_noise",
    "evaluate",
    "fisher_information",
    "fixed_length_cat",
    "generate_synthetic",
    "ground_truth_ranking",
    "init_session",
    "kendall_tau",
    "log_likelihood",
    "logistic_mean",
    "pairwise_confidence",
    "response_variance",
    "run_random_baseline",
    "run_ranker",
    "tie_metrics",
]
