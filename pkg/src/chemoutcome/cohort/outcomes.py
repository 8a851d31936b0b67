"""Failure labels and time-to-event derivation."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import NegativeDuration
from ..extraction.schema import OutcomeRecord
from .records import SurvivalRecord

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanDrug:
    gpi8: str
    name: str
    total_dose: float
    dose_unit: str
    weeks: int

    def __post_init__(self):
        if len(self.gpi8) != 8:
            raise ValueError(f"gpi8 code {self.gpi8!r} must have exactly 8 characters")
        if self.weeks < 1:
            raise ValueError(f"weeks must be positive for {self.name}")


@dataclass
class TreatmentPlan:
    patient_id: str
    plan_start: dt.date
    plan_end: Optional[dt.date] = None
    drugs: list[PlanDrug] = field(default_factory=list)
    plan_id: str = ""

    def __post_init__(self):
        if self.plan_end is not None and self.plan_end < self.plan_start:
            raise ValueError(f"plan {self.plan_id or self.patient_id}: plan_end before plan_start")


def is_failure(rec: OutcomeRecord) -> bool:
    p, t, d = rec.progression, rec.toxicity, rec.death_hospice
    return (p.progressed and p.discontinued) or (t.adverse_effects and t.discontinued_or_modified) or d.died or d.hospice


def derive_failure(
    outcomes: Sequence[tuple[dt.date, OutcomeRecord]], plan: TreatmentPlan
) -> tuple[bool, Optional[dt.date]]:
    """Composite treatment failure from dated outcome records.

    Failure is progression with discontinuation, toxicity with
    discontinuation or modification, death, or hospice. The event date is the
    earliest qualifying note date, or the stated death/hospice date when the
    record gives one.
    """
    candidates = []
    for note_date, rec in outcomes:
        if note_date < plan.plan_start or not is_failure(rec):
            continue
        when = note_date
        dh = rec.death_hospice
        if (dh.died or dh.hospice) and dh.event_date:
            stated = dt.date.fromisoformat(dh.event_date)
            if stated >= plan.plan_start:
                when = stated
        candidates.append(when)
    if not candidates:
        return False, None
    return True, min(candidates)


def time_to_event(
    plan: TreatmentPlan, event_date: Optional[dt.date], last_observation: dt.date
) -> SurvivalRecord:
    if event_date is not None:
        days = (event_date - plan.plan_start).days
        if days < 0:
            raise NegativeDuration(f"{plan.patient_id}: event {event_date} precedes plan start {plan.plan_start}")
        event = True
    else:
        days = (last_observation - plan.plan_start).days
        if days < 0:
            raise NegativeDuration(
                f"{plan.patient_id}: last observation {last_observation} precedes plan start {plan.plan_start}"
            )
        event = False
    if days == 0:
        log.warning("%s: zero follow-up, clamped to 1 day", plan.patient_id)
        days = 1
    return SurvivalRecord(plan.patient_id, days, event)
