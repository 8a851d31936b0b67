"""Survival-model evaluation: C-index, classification at a time point,
time-point sweep, calibration bins and permutation importance.

Classification labels at time ``t``: failure if an event occurred at or
before ``t``; non-failure if follow-up extends past ``t``. Patients censored
at or before ``t`` have an unknowable label and are left out of every metric
computed at ``t``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import NoComparablePairs
from ..metrics import ConfusionCounts, f1_per_class, metrics_from_confusion


def concordance_index(risks, time, event=None) -> float:
    """Harrell's C.

    A pair (i, j) is comparable when ``time[i] < time[j]`` and ``i`` had the
    event; pairs tied on time are not compared. Higher risk for ``i`` is
    concordant and a risk tie counts one half.
    """
    if event is None:  # records form
        from .estimators import as_arrays

        time, event = as_arrays(time)
    r = np.asarray(risks, dtype=float)
    t = np.asarray(time, dtype=float)
    e = np.asarray(event, dtype=bool)
    if not (len(r) == len(t) == len(e)) or len(r) < 2:
        raise ValueError("need >= 2 aligned risks and records")
    conc = ties = comparable = 0
    ev = np.nonzero(e)[0]
    for start in range(0, len(ev), 512):
        I = ev[start : start + 512]
        later = t[None, :] > t[I][:, None]
        comparable += int(later.sum())
        conc += int(((r[I][:, None] > r[None, :]) & later).sum())
        ties += int(((r[I][:, None] == r[None, :]) & later).sum())
    if comparable == 0:
        raise NoComparablePairs("no comparable pairs")
    return (conc + 0.5 * ties) / comparable


def labels_at(time, event, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(labels, mask): failure-by-``t`` labels and which rows are known."""
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    y = (event & (time <= t)).astype(int)
    known = (time > t) | (event & (time <= t))
    return y, known


def classify_survival(surv_at_t, threshold: float = 0.5) -> np.ndarray:
    """Failure iff S(t*) < threshold (strict)."""
    return (np.asarray(surv_at_t, dtype=float) < threshold).astype(int)


def classify_at(model, X, t_star: float, threshold: float = 0.5) -> np.ndarray:
    if t_star <= 0:
        raise ValueError("t_star must be positive")
    return classify_survival(model.predict_survival_at(X, t_star), threshold)


@dataclass
class TimePointMetrics:
    t: float
    n_evaluated: int
    accuracy: Optional[float]
    f1_pos: Optional[float]
    f1_neg: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    composite: float
    flags: list[str] = field(default_factory=list)


def metrics_at(surv_at_t, time, event, t: float, threshold: float = 0.5) -> TimePointMetrics:
    y, known = labels_at(time, event, t)
    pred = classify_survival(surv_at_t, threshold)[known]
    y = y[known]
    if not len(y):
        return TimePointMetrics(t, 0, None, None, None, None, None, 0.0, ["no_evaluable_rows"])
    m = metrics_from_confusion(ConfusionCounts.from_lists(pred, y))
    f1 = f1_per_class(pred, y)
    parts = [m.accuracy, f1.f1_pos, f1.f1_neg]
    composite = float(np.mean([v if v is not None else 0.0 for v in parts]))
    return TimePointMetrics(
        float(t), int(len(y)), m.accuracy, f1.f1_pos, f1.f1_neg, m.precision, m.recall, composite,
        sorted(set(f1.flags + m.undefined)),
    )


def survival_at(S: np.ndarray, grid: np.ndarray, t: float) -> np.ndarray:
    idx = np.searchsorted(grid, t, side="right")
    return np.ones(len(S)) if idx == 0 else S[:, idx - 1]


def sweep_time_points(model, X, time, event, grid: Sequence[float], threshold: float = 0.5, S=None):
    """Pick the grid point maximizing mean(accuracy, F1_pos, F1_neg).

    Undefined metrics count as 0 in the composite. Ties go to the earlier
    time. Returns ``(t_star, table)``.
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("time grid is empty")
    if S is None:
        S = model.predict_survival_matrix(X)
    table = [metrics_at(survival_at(S, model.time_grid, t), time, event, t, threshold) for t in grid]
    best = table[0]
    for row in table[1:]:
        if row.composite > best.composite:
            best = row
    return best.t, table


@dataclass
class CalibrationBin:
    lower: float
    upper: float
    mean_predicted: Optional[float]
    observed_fraction: Optional[float]
    count: int


def calibration_curve(probs, outcomes, n_bins: int = 10) -> list[CalibrationBin]:
    """Equal-width bins [0, .1), ..., [.9, 1.0]; empty bins carry None."""
    p = np.asarray(probs, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if len(p) != len(y):
        raise ValueError("probabilities and outcomes differ in length")
    if len(p) and (p.min() < 0 or p.max() > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    idx = np.clip(np.floor(p * n_bins).astype(int), 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        sel = idx == b
        cnt = int(sel.sum())
        bins.append(
            CalibrationBin(
                b / n_bins,
                (b + 1) / n_bins,
                float(p[sel].mean()) if cnt else None,
                float(y[sel].mean()) if cnt else None,
                cnt,
            )
        )
    return bins


@dataclass
class FeatureImportance:
    feature: str
    importance: float
    std: float


def permutation_importance(model, X, time, event, repeats: int = 5, seed: int = 0) -> list[FeatureImportance]:
    """Mean drop in C-index when one column is shuffled, best first."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X = np.asarray(X, dtype=float)
    base = concordance_index(model.predict_risk(X), time, event)
    rng = np.random.default_rng(seed)
    out = []
    for f, name in enumerate(model.feature_names):
        drops = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, f] = rng.permutation(Xp[:, f])
            drops.append(base - concordance_index(model.predict_risk(Xp), time, event))
        out.append(FeatureImportance(name, float(np.mean(drops)), float(np.std(drops))))
    order = sorted(range(len(out)), key=lambda i: (-out[i].importance, i))
    return [out[i] for i in order]


@dataclass
class EvalReport:
    c_index: float
    time_point_days: float
    accuracy: Optional[float]
    f1_pos: Optional[float]
    f1_neg: Optional[float]
    f1_macro: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    n_evaluated: int
    failure_prevalence: float
    calibration_bins: list[CalibrationBin]
    feature_importances: list[FeatureImportance]
    sweep: list[TimePointMetrics]
    protocol: dict
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


EVAL_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "c_index", "time_point_days", "accuracy", "f1_pos", "f1_neg", "calibration_bins",
        "feature_importances", "protocol", "sweep",
    ],
    "properties": {
        "c_index": {"type": "number", "minimum": 0, "maximum": 1},
        "time_point_days": {"type": "number", "exclusiveMinimum": 0},
        "accuracy": {"type": ["number", "null"]},
        "f1_pos": {"type": ["number", "null"]},
        "f1_neg": {"type": ["number", "null"]},
        "calibration_bins": {
            "type": "array",
            "minItems": 10,
            "maxItems": 10,
            "items": {
                "type": "object",
                "required": ["lower", "upper", "mean_predicted", "observed_fraction", "count"],
                "properties": {"count": {"type": "integer", "minimum": 0}},
            },
        },
        "feature_importances": {
            "type": "array",
            "items": {"type": "object", "required": ["feature", "importance"]},
        },
        "protocol": {"type": "object", "required": ["seed", "split"]},
    },
}


def evaluate_model(
    model,
    X,
    time,
    event,
    grid: Sequence[float],
    threshold: float = 0.5,
    importance_repeats: int = 5,
    seed: int = 0,
    protocol: dict | None = None,
) -> EvalReport:
    X = np.asarray(X, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    S = model.predict_survival_matrix(X)
    c = concordance_index(model.predict_risk(X), time, event)
    t_star, table = sweep_time_points(model, X, time, event, grid, threshold, S=S)
    best = next(r for r in table if r.t == t_star)
    s_star = survival_at(S, model.time_grid, t_star)
    y, known = labels_at(time, event, t_star)
    bins = calibration_curve(1.0 - s_star[known], y[known])
    importances = permutation_importance(model, X, time, event, importance_repeats, seed)
    macro = [v for v in (best.f1_pos, best.f1_neg) if v is not None]
    return EvalReport(
        c_index=c,
        time_point_days=t_star,
        accuracy=best.accuracy,
        f1_pos=best.f1_pos,
        f1_neg=best.f1_neg,
        f1_macro=(sum(macro) / len(macro)) if macro else None,
        precision=best.precision,
        recall=best.recall,
        n_evaluated=best.n_evaluated,
        failure_prevalence=float(event.mean()),
        calibration_bins=bins,
        feature_importances=importances,
        sweep=table,
        protocol=dict(protocol or {}),
        flags=best.flags,
    )
