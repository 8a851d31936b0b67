"""Join extraction output, EMR rows and treatment plans into a modelling dataset."""

from __future__ import annotations

import datetime as dt
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..errors import AlignmentError
from ..extraction.schema import OutcomeRecord, PhenotypeRecord
from .features import EmrRow, FeatureVector, assemble_features, cohort_summary, feature_columns, merge_phenotypes
from .io import first_plans
from .outcomes import TreatmentPlan, derive_failure, time_to_event
from .records import SurvivalRecord
from .regimens import ApprovedDrug, RegimenCatalog, build_regimen_features

log = logging.getLogger(__name__)


@dataclass
class Extraction:
    """One (note, target) extraction result with its note date."""

    patient_id: str
    note_id: str
    note_date: dt.date
    target: str
    record: PhenotypeRecord | OutcomeRecord


@dataclass
class Dataset:
    columns: list[str]
    features: list[FeatureVector]
    records: list[SurvivalRecord]
    catalog: RegimenCatalog
    dropped: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        s = cohort_summary(self.records, self.features, self.catalog)
        s["dropped_patients"] = list(self.dropped)
        s["conflicts"] = sum(len(f.conflicts) for f in self.features)
        return s


def build_dataset(
    extractions: Sequence[Extraction],
    emr: Mapping[str, EmrRow],
    plans: Sequence[TreatmentPlan],
    approved: Sequence[ApprovedDrug],
    support_threshold: int = 20,
    strict: bool = False,
) -> Dataset:
    """Feature matrix and survival records for patients present in EMR and plans.

    Only each patient's earliest plan is used. Patients missing from either
    source are dropped with a warning, or raise ``AlignmentError`` when
    ``strict``. An empty intersection always raises.
    """
    plan_by_id = first_plans(plans)
    orphans = sorted(set(emr) ^ set(plan_by_id))
    ids = sorted(set(emr) & set(plan_by_id))
    if not ids:
        raise AlignmentError("no patient appears in both the EMR table and the treatment plans", orphans=orphans)
    if orphans:
        if strict:
            raise AlignmentError(f"{len(orphans)} patients lack either EMR or plan data", orphans=orphans)
        log.warning("dropping %d patients without both EMR and plan data: %s", len(orphans), orphans[:10])

    by_patient: dict[str, list[Extraction]] = defaultdict(list)
    for e in extractions:
        by_patient[e.patient_id].append(e)
    stray = sorted(set(by_patient) - set(ids))
    if stray:
        log.warning("ignoring extractions for %d patients outside the cohort", len(stray))

    cohort_plans = [plan_by_id[i] for i in ids]
    catalog, vectors = build_regimen_features(cohort_plans, approved, support_threshold)
    columns = feature_columns(catalog)

    features, records = [], []
    for pid in ids:
        plan = plan_by_id[pid]
        items = sorted(by_patient.get(pid, []), key=lambda e: (e.note_date, e.note_id))
        pheno = merge_phenotypes([e.record for e in items if e.target == "phenotype"])
        outcomes = [(e.note_date, e.record) for e in items if e.target == "outcome"]
        event, when = derive_failure(outcomes, plan)
        # follow-up ends at the last note; the plan end date is not an observation
        last = max((e.note_date for e in items), default=plan.plan_start)
        records.append(time_to_event(plan, when, max(last, plan.plan_start)))
        features.append(assemble_features(emr[pid], pheno, plan, vectors[pid], strict=strict))
    return Dataset(columns, features, records, catalog, orphans)
