"""Per-patient feature assembly and cohort summaries."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

from ..errors import ConflictingValues
from ..extraction.schema import PhenotypeRecord
from . import encoding
from .encoding import MISSING
from .outcomes import TreatmentPlan
from .records import SurvivalRecord
from .regimens import RegimenCatalog

log = logging.getLogger(__name__)

PHENOTYPE_FIELDS = ("er", "pr", "her2", "ecog", "karnofsky", "t_stage", "n_stage", "m_stage", "stage_group", "grade")
BASE_COLUMNS = (
    "bsa", "age", "gender", "srcr", "readmission_score",
    *PHENOTYPE_FIELDS,
    "dose_per_week", "weeks",
)

# conversion factors to mg; body-surface units need BSA
UNIT_TO_MG = {"mg": 1.0, "g": 1000.0, "mcg": 0.001, "ug": 0.001}
PER_M2_UNITS = {"mg/m2": 1.0, "mg/m^2": 1.0, "g/m2": 1000.0, "mcg/m2": 0.001}


@lru_cache(maxsize=1)
def elixhauser_table() -> tuple[tuple[str, str, tuple[str, ...]], ...]:
    text = resources.files("chemoutcome.data").joinpath("elixhauser_icd10.csv").read_text("utf-8")
    rows = csv.DictReader(io.StringIO(text))
    return tuple(
        (r["group"], r["description"], tuple(p.replace(".", "") for p in r["icd10_prefixes"].split(";")))
        for r in rows
    )


def comorbidity_columns() -> list[str]:
    return [f"comorb:{g}" for g, _, _ in elixhauser_table()]


def elixhauser_flags(icd10_codes: Sequence[str]) -> dict[str, int]:
    codes = [c.strip().upper().replace(".", "") for c in icd10_codes if c.strip()]
    return {
        f"comorb:{group}": int(any(c.startswith(p) for c in codes for p in prefixes))
        for group, _, prefixes in elixhauser_table()
    }


@dataclass
class EmrRow:
    patient_id: str
    age: float
    gender: Optional[str] = None
    bsa: Optional[float] = None
    srcr: Optional[float] = None
    readmission_score: Optional[float] = None
    icd10_codes: list[str] = field(default_factory=list)
    # structured phenotype values; None when the EMR has no entry
    phenotype: dict = field(default_factory=dict)


@dataclass
class FeatureVector:
    patient_id: str
    values: dict[str, float]
    conflicts: list[str] = field(default_factory=list)
    excluded_doses: list[str] = field(default_factory=list)

    def row(self, columns: Sequence[str]) -> list[float]:
        return [self.values[c] for c in columns]


def merge_phenotypes(records: Sequence[PhenotypeRecord]) -> PhenotypeRecord:
    """First stated value per field across notes in date order."""
    merged = PhenotypeRecord()
    for rec in records:
        for f in PHENOTYPE_FIELDS + ("tumor_size_cm",):
            cur, new = getattr(merged, f), getattr(rec, f)
            if (cur is None or cur == "unknown") and new is not None and new != "unknown":
                setattr(merged, f, new)
    return merged


def dose_in_mg(total: float, unit: str, bsa: Optional[float]) -> Optional[float]:
    u = unit.strip().lower().replace(" ", "")
    if u in UNIT_TO_MG:
        return total * UNIT_TO_MG[u]
    if u in PER_M2_UNITS and bsa is not None:
        return total * PER_M2_UNITS[u] * bsa
    return None


def _present(v) -> bool:
    return v is not None and v != "" and v != "unknown"


def assemble_features(
    emr: EmrRow,
    phenotype: PhenotypeRecord,
    plan: TreatmentPlan,
    regimen_vector: dict[str, int],
    strict: bool = False,
) -> FeatureVector:
    """Encode one patient. Structured EMR values win over extracted ones."""
    if emr.patient_id != plan.patient_id:
        raise ValueError(f"patient ids disagree: {emr.patient_id} vs {plan.patient_id}")
    fv = FeatureVector(emr.patient_id, {})
    v = fv.values
    v["bsa"] = encoding.encode_numeric(emr.bsa)
    v["age"] = float(emr.age)
    v["gender"] = encoding.encode("gender", encoding.normalize_gender(emr.gender))
    v["srcr"] = encoding.encode_numeric(emr.srcr)
    v["readmission_score"] = encoding.encode_numeric(emr.readmission_score)

    for f in PHENOTYPE_FIELDS:
        structured, extracted = emr.phenotype.get(f), getattr(phenotype, f)
        if _present(structured) and _present(extracted) and structured != extracted:
            msg = f"{f}: EMR={structured!r} extracted={extracted!r}"
            if strict:
                raise ConflictingValues(f"{emr.patient_id} {msg}")
            log.info("patient %s conflict %s; using EMR value", emr.patient_id, msg)
            fv.conflicts.append(msg)
        value = structured if _present(structured) else extracted
        if f in ("ecog", "karnofsky"):
            v[f] = encoding.encode_numeric(int(value) if _present(value) else None)
        else:
            v[f] = encoding.encode(f, value if _present(value) else None)

    per_week = 0.0
    usable = 0
    for d in plan.drugs:
        mg = dose_in_mg(d.total_dose, d.dose_unit, emr.bsa)
        if mg is None:
            log.warning("patient %s: cannot normalise %s %s of %s", emr.patient_id, d.total_dose, d.dose_unit, d.name)
            fv.excluded_doses.append(d.name)
            continue
        per_week += mg / d.weeks
        usable += 1
    v["dose_per_week"] = per_week if usable else MISSING
    v["weeks"] = float(max(d.weeks for d in plan.drugs)) if plan.drugs else MISSING

    v.update({k: float(x) for k, x in elixhauser_flags(emr.icd10_codes).items()})
    v.update({k: float(x) for k, x in regimen_vector.items()})
    return fv


def feature_columns(catalog: RegimenCatalog) -> list[str]:
    return list(BASE_COLUMNS) + comorbidity_columns() + catalog.columns


def cohort_summary(records: Sequence[SurvivalRecord], features: Sequence[FeatureVector], catalog=None) -> dict:
    """n, failure prevalence and per-regimen failure percentages."""
    n = len(records)
    by_id = {r.patient_id: r for r in records}
    summary = {"n": n, "failure_prevalence": (sum(r.event for r in records) / n) if n else None, "regimens": {}}
    cols = [c for c in (catalog.columns if catalog else (features[0].values if features else [])) if c.startswith(("regimen:", "drug:"))]
    for col in cols:
        ids = [f.patient_id for f in features if f.values.get(col) == 1.0 and f.patient_id in by_id]
        if ids:
            failed = sum(by_id[i].event for i in ids)
            summary["regimens"][col] = {"n": len(ids), "failure_pct": 100.0 * failed / len(ids)}
    if catalog is not None:
        summary["combinations_observed"] = len(catalog.combinations)
        summary["combinations_retained"] = len(catalog.retained)
        summary["support_threshold"] = catalog.support_threshold
        summary["individual_drugs"] = len(catalog.drugs)
    return summary


def data_dictionary(columns: Sequence[str]) -> dict:
    """Column descriptions and encoding tables for the feature CSV."""
    tables = {k: {str(a): b for a, b in t.items()} for k, t in encoding.TABLES.items()}
    desc = {
        "bsa": "body surface area, m^2",
        "age": "age at plan start, years",
        "gender": "gender code (table 'gender')",
        "srcr": "serum creatinine, mg/dL",
        "readmission_score": "readmission score, pass-through numeric",
        "ecog": "ECOG performance status 0-5",
        "karnofsky": "Karnofsky performance status 0-100",
        "dose_per_week": "sum over drugs of total dose in mg / weeks of that drug",
        "weeks": "longest drug duration in the plan, weeks",
    }
    cols = []
    for c in columns:
        if c in encoding.TABLES:
            d = f"ordinal code (table '{c}')"
        elif c.startswith("comorb:"):
            d = f"Elixhauser group flag {c[7:]}"
        elif c.startswith("regimen:"):
            d = f"first plan is exactly the combination {c[8:]}"
        elif c == "drug:other":
            d = "plan contains a drug code outside the approved list"
        elif c.startswith("drug:"):
            d = f"plan contains {c[5:]}"
        else:
            d = desc.get(c, "")
        cols.append({"name": c, "description": d})
    return {
        "columns": cols,
        "missing_marker": MISSING,
        "not_assessed_marker": encoding.NOT_ASSESSED,
        "encodings": tables,
        "notes": "biomarker 'unknown' and absent values encode to missing_marker; TX/NX/MX/GX to not_assessed_marker",
    }
