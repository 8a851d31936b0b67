"""Survival estimation, Random Survival Forest and model evaluation."""

from .estimators import (
    CumulativeHazard,
    SurvivalFunction,
    kaplan_meier,
    logrank_statistic,
    nelson_aalen,
)
from .evaluation import (
    EVAL_REPORT_SCHEMA,
    CalibrationBin,
    EvalReport,
    calibration_curve,
    classify_at,
    concordance_index,
    evaluate_model,
    labels_at,
    permutation_importance,
    sweep_time_points,
)
from .forest import (
    ForestParams,
    SurvivalForestModel,
    SurvivalTree,
    deserialize_model,
    fit_forest,
    serialize_model,
)
