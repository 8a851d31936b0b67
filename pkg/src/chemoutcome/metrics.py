"""Confusion counts and classification metrics.

Ratios with a zero denominator are reported as ``None`` and listed in
``undefined`` rather than silently set to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import AlignmentError, EmptyPopulation


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_lists(cls, preds: Sequence, labels: Sequence, positive=1) -> "ConfusionCounts":
        if len(preds) != len(labels):
            raise AlignmentError(f"{len(preds)} predictions vs {len(labels)} labels")
        tp = fp = tn = fn = 0
        for p, y in zip(preds, labels):
            p, y = p == positive, y == positive
            if p and y:
                tp += 1
            elif p:
                fp += 1
            elif y:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)


@dataclass
class Metrics:
    accuracy: Optional[float]
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    undefined: list[str] = field(default_factory=list)


def _ratio(num, den):
    return num / den if den else None


def metrics_from_confusion(c: ConfusionCounts) -> Metrics:
    if c.total == 0:
        raise EmptyPopulation("no evaluated samples")
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    m = Metrics(_ratio(c.tp + c.tn, c.total), precision, recall, f1)
    m.undefined = [k for k in ("precision", "recall", "f1") if getattr(m, k) is None]
    return m


@dataclass
class PerClassF1:
    f1_pos: Optional[float]
    f1_neg: Optional[float]
    flags: list[str] = field(default_factory=list)

    @property
    def macro(self) -> Optional[float]:
        vals = [v for v in (self.f1_pos, self.f1_neg) if v is not None]
        return sum(vals) / len(vals) if vals else None


def f1_per_class(preds: Sequence[int], labels: Sequence[int]) -> PerClassF1:
    """F1 with each class in turn treated as the positive one.

    F1 = 2TP / (2TP + FP + FN), so it is 0 (not undefined) when a class is
    never predicted but does occur. Such cases are flagged, e.g.
    ``precision_neg_undefined``.
    """
    pos = ConfusionCounts.from_lists(preds, labels, positive=1)
    neg = ConfusionCounts(tp=pos.tn, fp=pos.fn, tn=pos.tp, fn=pos.fp)
    out = PerClassF1(None, None)
    for name, c in (("pos", pos), ("neg", neg)):
        if c.total == 0:
            raise EmptyPopulation("no evaluated samples")
        m = metrics_from_confusion(c)
        setattr(out, f"f1_{name}", m.f1)
        out.flags += [f"{k}_{name}_undefined" for k in m.undefined]
    return out
