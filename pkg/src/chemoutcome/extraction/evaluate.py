"""Score extracted records against gold annotations."""

from __future__ import annotations

from dataclasses import asdict
from typing import Mapping, Sequence

from ..errors import AlignmentError
from ..metrics import ConfusionCounts, metrics_from_confusion
from .schema import OutcomeRecord, PhenotypeRecord, Record

CATEGORIES = {
    "progression": ("progression.progressed",),
    "toxicity": ("toxicity.adverse_effects", "toxicity.qol_deterioration"),
    "death": ("death_hospice.died", "death_hospice.hospice"),
}


def record_labels(rec: Record) -> dict:
    """Flatten a record into scoreable labels; ``None`` means "not asserted"."""
    if isinstance(rec, PhenotypeRecord):
        d = rec.to_dict()
        return {k: (None if v == "unknown" else v) for k, v in d.items()}
    out = {}
    for group, sub in rec.to_dict().items():
        for name, v in sub.items():
            if name == "details":
                continue
            out[f"{group}.{name}"] = v if v not in (False, None) else None
    return out


def _key(item) -> tuple:
    return (item[0], item[1])


def evaluate_extractions(
    predicted: Sequence[tuple[str, str, Record]],
    gold: Sequence[tuple[str, str, Record]],
) -> dict:
    """Per-label and micro-averaged metrics plus per-category TP/FP/precision.

    Items are ``(note_id, target, record)``. A label is a positive
    prediction when predicted non-null/true; it is a true positive only if
    the gold value matches.
    """
    pred = {_key(p): p[2] for p in predicted}
    ref = {_key(g): g[2] for g in gold}
    if len(pred) != len(predicted) or len(ref) != len(gold):
        raise AlignmentError("duplicate (note_id, target) entries")
    orphans = set(pred) ^ set(ref)
    if orphans:
        raise AlignmentError(f"{len(orphans)} unaligned (note_id, target) pairs", orphans=[f"{a}/{b}" for a, b in orphans])

    per_label: dict[str, ConfusionCounts] = {}
    cat_counts = {c: [0, 0] for c in CATEGORIES}
    for key in sorted(ref):
        p_lab, g_lab = record_labels(pred[key]), record_labels(ref[key])
        for name in g_lab:
            pv, gv = p_lab[name], g_lab[name]
            if pv is not None:
                c = ConfusionCounts(tp=1) if pv == gv else ConfusionCounts(fp=1)
            else:
                c = ConfusionCounts(fn=1) if gv is not None else ConfusionCounts(tn=1)
            per_label[name] = per_label.get(name, ConfusionCounts()) + c
        if isinstance(ref[key], OutcomeRecord):
            for cat, flags in CATEGORIES.items():
                if any(p_lab[f] for f in flags):
                    cat_counts[cat][0 if any(g_lab[f] for f in flags) else 1] += 1

    labels = {}
    micro = ConfusionCounts()
    for name in sorted(per_label):
        c = per_label[name]
        micro = micro + c
        labels[name] = {**asdict(c), **asdict(metrics_from_confusion(c))}
    result = {"labels": labels}
    if micro.total:
        result["micro"] = {**asdict(micro), **asdict(metrics_from_confusion(micro))}
    result["categories"] = {
        cat: {"tp": tp, "fp": fp, "precision": metrics_from_confusion(ConfusionCounts(tp=tp, fp=fp)).precision if tp + fp else None}
        for cat, (tp, fp) in cat_counts.items()
    }
    return result
