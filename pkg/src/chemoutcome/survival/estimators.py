"""Nonparametric estimators: Kaplan-Meier, Nelson-Aalen, two-sample log-rank."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DegenerateSplit, EmptyInput


class StepFunction:
    """Right-continuous step function, ``baseline`` before the first jump."""

    baseline = 0.0

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ValueError("times and values differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        out = np.concatenate([[self.baseline], self.values])[idx]
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"{type(self).__name__}(n_steps={len(self.times)})"


class SurvivalFunction(StepFunction):
    """S(t); equals 1 before the first event time."""

    baseline = 1.0

    @property
    def probabilities(self) -> np.ndarray:
        return self.values


class CumulativeHazard(StepFunction):
    baseline = 0.0

    def survival(self) -> SurvivalFunction:
        return SurvivalFunction(self.times, np.exp(-self.values))


def as_arrays(records) -> tuple[np.ndarray, np.ndarray]:
    """(time, event) arrays from SurvivalRecords or a ``(time, event)`` pair."""
    if isinstance(records, tuple) and len(records) == 2:
        t, e = records
        return np.asarray(t, dtype=float), np.asarray(e, dtype=bool)
    recs = list(records)
    return (
        np.array([r.time_days for r in recs], dtype=float),
        np.array([r.event for r in recs], dtype=bool),
    )


def risk_table(time: np.ndarray, event: np.ndarray):
    """Distinct event times with at-risk and event counts."""
    ut = np.unique(time[event])
    at_risk = len(time) - np.searchsorted(np.sort(time), ut, side="left")
    deaths = np.bincount(np.searchsorted(ut, time[event]), minlength=len(ut)) if len(ut) else np.zeros(0, int)
    return ut, at_risk.astype(float), deaths.astype(float)


def kaplan_meier(records) -> SurvivalFunction:
    time, event = as_arrays(records)
    if time.size == 0:
        raise EmptyInput("kaplan_meier needs at least one record")
    ut, n, d = risk_table(time, event)
    return SurvivalFunction(ut, np.cumprod(1.0 - d / n))


def nelson_aalen(records) -> CumulativeHazard:
    time, event = as_arrays(records)
    if time.size == 0:
        raise EmptyInput("nelson_aalen needs at least one record")
    ut, n, d = risk_table(time, event)
    return CumulativeHazard(ut, np.cumsum(d / n))


def logrank_statistic(left, right) -> float:
    """Two-sample log-rank chi-square statistic (1 degree of freedom)."""
    tl, el = as_arrays(left)
    tr, er = as_arrays(right)
    if tl.size == 0 or tr.size == 0:
        raise DegenerateSplit("log-rank needs two non-empty groups")
    time = np.concatenate([tl, tr])
    event = np.concatenate([el, er])
    if not event.any():
        raise DegenerateSplit("log-rank needs at least one event")
    ut, y, d = risk_table(time, event)
    # at-risk in the left group at each pooled event time
    yl = len(tl) - np.searchsorted(np.sort(tl), ut, side="left").astype(float)
    dl = np.array([np.sum((tl == u) & el) for u in ut], dtype=float)
    num = np.sum(dl - yl * d / y)
    with np.errstate(divide="ignore", invalid="ignore"):
        var_terms = np.where(y > 1, (yl / y) * (1 - yl / y) * (y - d) / (y - 1) * d, 0.0)
    var = float(np.sum(var_terms))
    if var <= 0:
        return 0.0
    return float(num * num / var)


def mean_survival_curve(curves: Sequence[SurvivalFunction], grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    return np.mean([c(grid) for c in curves], axis=0)
