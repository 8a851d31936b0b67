"""CSV/JSONL readers and writers for cohort inputs and the output dataset.

EMR CSV header::

    patient_id,age,gender,bsa,srcr,readmission_score,icd10_codes,
    er,pr,her2,t_stage,n_stage,m_stage,stage_group,grade,ecog,karnofsky

``icd10_codes`` is ``;``-separated. Empty cells mean missing.

Treatment plan CSV header (one row per drug)::

    patient_id,plan_id,plan_start,plan_end,gpi8,drug_name,total_dose,dose_unit,weeks
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from ..errors import DataError
from .features import PHENOTYPE_FIELDS, EmrRow, FeatureVector
from .outcomes import PlanDrug, TreatmentPlan
from .records import SurvivalRecord

EMR_COLUMNS = [
    "patient_id", "age", "gender", "bsa", "srcr", "readmission_score", "icd10_codes",
    *PHENOTYPE_FIELDS,
]
PLAN_COLUMNS = ["patient_id", "plan_id", "plan_start", "plan_end", "gpi8", "drug_name", "total_dose", "dose_unit", "weeks"]


def _opt_float(s: str):
    return float(s) if s.strip() else None


def _check_header(path, found, expected):
    if list(found or []) != expected:
        raise DataError(f"{path}: header must be {','.join(expected)}; got {','.join(found or [])}")


def read_emr_csv(path: str | Path) -> dict[str, EmrRow]:
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, EMR_COLUMNS)
        for lineno, r in enumerate(reader, start=2):
            try:
                pheno = {}
                for f in PHENOTYPE_FIELDS:
                    val = r[f].strip()
                    if not val:
                        pheno[f] = None
                    elif f in ("ecog", "karnofsky"):
                        pheno[f] = int(val)
                    else:
                        pheno[f] = val
                row = EmrRow(
                    patient_id=r["patient_id"],
                    age=float(r["age"]),
                    gender=r["gender"].strip() or None,
                    bsa=_opt_float(r["bsa"]),
                    srcr=_opt_float(r["srcr"]),
                    readmission_score=_opt_float(r["readmission_score"]),
                    icd10_codes=[c for c in r["icd10_codes"].split(";") if c.strip()],
                    phenotype=pheno,
                )
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if row.patient_id in rows:
                raise DataError(f"{path}:{lineno}: duplicate patient_id {row.patient_id}")
            rows[row.patient_id] = row
    return rows


def write_emr_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=EMR_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in EMR_COLUMNS})


def read_plans_csv(path: str | Path) -> list[TreatmentPlan]:
    plans: dict[tuple[str, str], TreatmentPlan] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(path, reader.fieldnames, PLAN_COLUMNS)
        for lineno, r in enumerate(reader, start=2):
            try:
                key = (r["patient_id"], r["plan_id"])
                start = dt.date.fromisoformat(r["plan_start"])
                end = dt.date.fromisoformat(r["plan_end"]) if r["plan_end"].strip() else None
                if key not in plans:
                    plans[key] = TreatmentPlan(r["patient_id"], start, end, [], r["plan_id"])
                elif plans[key].plan_start != start:
                    raise ValueError(f"plan {r['plan_id']} has inconsistent start dates")
                plans[key].drugs.append(
                    PlanDrug(r["gpi8"].strip(), r["drug_name"].strip(), float(r["total_dose"]), r["dose_unit"].strip(), int(r["weeks"]))
                )
            except (ValueError, KeyError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return list(plans.values())


def write_plans_csv(plans: Sequence[TreatmentPlan], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLAN_COLUMNS)
        for p in plans:
            for d in p.drugs:
                w.writerow([
                    p.patient_id, p.plan_id, p.plan_start.isoformat(),
                    p.plan_end.isoformat() if p.plan_end else "",
                    d.gpi8, d.name, repr(float(d.total_dose)), d.dose_unit, d.weeks,
                ])


def first_plans(plans: Sequence[TreatmentPlan]) -> dict[str, TreatmentPlan]:
    """Earliest plan per patient (ties broken by plan_id)."""
    by_patient = defaultdict(list)
    for p in plans:
        by_patient[p.patient_id].append(p)
    return {pid: min(ps, key=lambda p: (p.plan_start, p.plan_id)) for pid, ps in by_patient.items()}


def write_feature_csv(features: Sequence[FeatureVector], columns: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["patient_id", *columns])
        for fv in features:
            w.writerow([fv.patient_id, *(repr(x) for x in fv.row(columns))])


def read_feature_csv(path: str | Path) -> tuple[list[str], list[str], list[list[float]]]:
    """(patient_ids, columns, rows)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "patient_id":
            raise DataError(f"{path}: first column must be patient_id")
        ids, rows = [], []
        for r in reader:
            ids.append(r[0])
            rows.append([float(x) for x in r[1:]])
    return ids, header[1:], rows


def write_survival_jsonl(records: Sequence[SurvivalRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_survival_jsonl(path: str | Path) -> list[SurvivalRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    d = json.loads(line)
                    out.append(SurvivalRecord(d["patient_id"], int(d["time_days"]), bool(d["event"])))
                except (ValueError, KeyError) as exc:
                    raise DataError(f"{path}:{lineno}: {exc}") from None
    return out
