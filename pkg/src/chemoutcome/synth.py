"""Synthetic oncology cohorts for desk-scale runs and tests.

``synthesize_cohort`` writes notes from sentence templates together with the
matching EMR table, treatment plans and gold extraction labels. Gold labels
come from the generator's own state, not from the extraction rules, so
scoring the rule backend against them is a real check. Failure times follow
a Weibull proportional-hazards model driven by stage, ECOG, receptor status
and regimen, so a survival model has signal to find.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import ClinicalNote, preprocess_note, write_corpus
from .cohort.features import elixhauser_table
from .cohort.io import write_emr_csv, write_plans_csv
from .cohort.outcomes import PlanDrug, TreatmentPlan
from .cohort.regimens import load_approved_drugs
from .extraction.schema import OutcomeRecord, PhenotypeRecord


def weibull_cohort(
    n: int = 2000,
    seed: int = 0,
    hazard_ratio: float = 5.0,
    shape: float = 1.5,
    scale: float = 500.0,
    censor_fraction: float = 0.3,
    n_noise: int = 4,
):
    """Proportional-hazards Weibull cohort with one binary risk feature.

    Column 0 (``risk_flag``) multiplies the hazard by ``hazard_ratio``; the
    other columns are independent noise. Censoring is exponential with its
    rate bisected so that the censored share is close to ``censor_fraction``.
    Returns ``(X, time_days, event, names)``.
    """
    rng = np.random.default_rng(seed)
    flag = rng.integers(0, 2, n).astype(float)
    noise = rng.normal(size=(n, n_noise))
    X = np.column_stack([flag, noise])
    e = rng.exponential(size=n)
    hr = np.where(flag == 1, hazard_ratio, 1.0)
    t_event = scale * (e / hr) ** (1.0 / shape)
    u = rng.exponential(size=n)

    def censored_share(rate):
        return float(np.mean(u / rate < t_event))

    lo, hi = 1e-9, 1.0
    for _ in range(100):
        mid = (lo + hi) / 2
        if censored_share(mid) < censor_fraction:
            lo = mid
        else:
            hi = mid
    t_cens = u / ((lo + hi) / 2)
    event = t_event <= t_cens
    time = np.maximum(1.0, np.ceil(np.minimum(t_event, t_cens)))
    names = ["risk_flag"] + [f"noise_{i}" for i in range(n_noise)]
    return X, time, event, names


# -- corpus generator --------------------------------------------------------

STAGE_GROUPS = ["I", "IA", "IB", "II", "IIA", "IIB", "III", "IIIA", "IIIB", "IIIC", "IV"]
_STAGE_WEIGHTS = [2, 6, 3, 2, 8, 6, 1, 4, 2, 2, 4]

# regimen name (drug set) -> prior weight; names must be in the approved list
REGIMENS = {
    ("Cyclophosphamide", "Doxorubicin HCl"): 22,
    ("Cyclophosphamide", "Docetaxel"): 18,
    ("Paclitaxel",): 14,
    ("Carboplatin", "Docetaxel", "Trastuzumab"): 12,
    ("Paclitaxel", "Trastuzumab"): 10,
    ("Capecitabine",): 8,
    ("Pertuzumab", "Docetaxel", "Trastuzumab"): 6,
    ("Gemcitabine", "Carboplatin"): 4,
    ("Eribulin",): 2,
    ("Vinorelbine",): 1,
    ("Nab-Paclitaxel", "Gemcitabine"): 1,
}
# log hazard contribution per regimen, relative to the most common one
REGIMEN_EFFECT = {
    ("Cyclophosphamide", "Doxorubicin HCl"): 0.0,
    ("Cyclophosphamide", "Docetaxel"): -0.2,
    ("Paclitaxel",): 0.1,
    ("Carboplatin", "Docetaxel", "Trastuzumab"): -0.3,
    ("Paclitaxel", "Trastuzumab"): -0.1,
    ("Capecitabine",): 0.6,
    ("Pertuzumab", "Docetaxel", "Trastuzumab"): -0.4,
    ("Gemcitabine", "Carboplatin"): 0.7,
    ("Eribulin",): 0.9,
    ("Vinorelbine",): 0.8,
    ("Nab-Paclitaxel", "Gemcitabine"): 0.7,
}
# dose per administration, unit, weeks
DOSING = {
    "Cyclophosphamide": (600.0, "mg/m2", 12),
    "Doxorubicin HCl": (60.0, "mg/m2", 12),
    "Docetaxel": (75.0, "mg/m2", 12),
    "Paclitaxel": (80.0, "mg/m2", 12),
    "Carboplatin": (600.0, "mg", 18),
    "Trastuzumab": (420.0, "mg", 52),
    "Pertuzumab": (840.0, "mg", 18),
    "Capecitabine": (2.0, "g", 24),
    "Gemcitabine": (1000.0, "mg/m2", 18),
    "Eribulin": (1.4, "mg/m2", 18),
    "Vinorelbine": (25.0, "mg/m2", 18),
    "Nab-Paclitaxel": (125.0, "mg/m2", 18),
}
UNLISTED_DRUG = ("99887766", "Investigational agent")

_FILLER = [
    "Vital signs reviewed and stable.",
    "Labs reviewed with the patient.",
    "Medication list reconciled.",
    "Patient attended with a family member.",
    "Appetite is fair and weight is unchanged.",
    "Questions answered and plan agreed.",
    "Return to clinic in three weeks.",
    "Port site clean and intact.",
    "Sleep is adequate.",
    "Antiemetic prescription renewed.",
]
# negated mentions; all labels stay false
_NEGATED = [
    "No evidence of disease progression on imaging.",
    "Restaging scan shows no new metastatic lesions.",
    "Patient denies nausea or vomiting.",
    "Patient declined hospice referral at this time.",
]
_SOFT_EVENTS = [
    # non-failure but positive labels
    ("Mild fatigue reported, managed supportively.", {"toxicity.adverse_effects"}),
    ("Low grade nausea controlled with ondansetron.", {"toxicity.adverse_effects"}),
    ("Imaging shows minimal progression; treatment continued unchanged.", {"progression.progressed"}),
    ("Patient describes a decline in quality of life since the last cycle.", {"toxicity.qol_deterioration"}),
]
_PROGRESSION = [
    "Restaging CT shows disease progression with new liver lesions; {drug} was discontinued.",
    "Progressive disease in bone; chemotherapy stopped and the patient was referred for radiation.",
    "PET scan confirms progression, so {drug} was discontinued.",
]
_TOXICITY = [
    "Grade 3 neutropenia after cycle {cycle} required a dose reduction of {drug}.",
    "{drug} was held because of febrile neutropenia.",
    "Severe peripheral neuropathy developed and {drug} was discontinued.",
    "Persistent diarrhea led to a dose delay and reduced dose of {drug}.",
]


def _iso_or_us(rng, d: dt.date) -> str:
    return d.isoformat() if rng.random() < 0.7 else f"{d.month}/{d.day}/{d.year}"


_DEATH = ["Patient died on {date}.", "Family reports the patient passed away on {date}.", "The patient expired on {date}."]
_HOSPICE = [
    "Patient was transferred to hospice care on {date}.",
    "Enrolled in home hospice on {date}.",
]


@dataclass
class SyntheticPatient:
    patient_id: str
    phenotype: PhenotypeRecord
    plan: TreatmentPlan
    notes: list[ClinicalNote]
    gold: list[tuple[str, str, dict]]  # (note_id, target, record dict)
    emr: dict
    event: bool
    event_date: dt.date | None
    failure_kind: str | None


@dataclass
class SyntheticCohort:
    patients: list[SyntheticPatient] = field(default_factory=list)

    @property
    def notes(self) -> list[ClinicalNote]:
        return [n for p in self.patients for n in p.notes]

    @property
    def plans(self) -> list[TreatmentPlan]:
        return [p.plan for p in self.patients]

    @property
    def gold(self) -> list[tuple[str, str, dict]]:
        return [g for p in self.patients for g in p.gold]


def _tnm_for_stage(rng, stage: str) -> tuple[str, str, str]:
    if stage == "IV":
        return rng.choice(["T2", "T3", "T4"]), rng.choice(["N1", "N2", "N3"]), "M1"
    if stage.startswith("III"):
        return rng.choice(["T2", "T3", "T4"]), rng.choice(["N1", "N2", "N3"]), "M0"
    if stage.startswith("II"):
        return rng.choice(["T1", "T2", "T3"]), rng.choice(["N0", "N1"]), "M0"
    return rng.choice(["Tis", "T1"]), "N0", "M0"


def _phenotype(rng) -> PhenotypeRecord:
    stage = str(rng.choice(STAGE_GROUPS, p=np.array(_STAGE_WEIGHTS) / sum(_STAGE_WEIGHTS)))
    t, n, m = (str(x) for x in _tnm_for_stage(rng, stage))
    ecog = int(rng.choice([0, 1, 2, 3], p=[0.45, 0.35, 0.15, 0.05]))
    er = "positive" if rng.random() < 0.7 else "negative"
    pr = ("positive" if rng.random() < 0.8 else "negative") if er == "positive" else (
        "positive" if rng.random() < 0.1 else "negative")
    return PhenotypeRecord(
        t_stage=t,
        n_stage=n,
        m_stage=m if rng.random() > 0.05 else "MX",
        stage_group=stage,
        tumor_size_cm=round(float(rng.uniform(0.5, 7.5)), 1),
        grade=str(rng.choice(["G1", "G2", "G3", "GX"], p=[0.2, 0.4, 0.35, 0.05])),
        ecog=ecog,
        karnofsky=[100, 80, 70, 50][ecog] if rng.random() > 0.3 else [90, 80, 60, 40][ecog],
        er=er,
        pr=pr,
        her2="positive" if rng.random() < 0.2 else "negative",
    )


def _sign(v: str) -> str:
    return "+" if v == "positive" else "-"


def _phenotype_sentences(rng, ph: PhenotypeRecord, stated: set[str]) -> list[str]:
    out = []
    if {"t_stage", "n_stage", "m_stage"} <= stated:
        if rng.random() < 0.5:
            out.append(f"Clinical staging c{ph.t_stage}{ph.n_stage}{ph.m_stage}.")
        else:
            out.append(f"TNM staging {ph.t_stage}, {ph.n_stage}, {ph.m_stage}.")
    if "stage_group" in stated:
        out.append(f"Stage {ph.stage_group} invasive ductal carcinoma of the left breast.")
    if "tumor_size_cm" in stated:
        if rng.random() < 0.7:
            out.append(f"Primary tumor measures {ph.tumor_size_cm:.1f} cm on ultrasound.")
        else:
            out.append(f"Ultrasound shows a mass of {int(round(ph.tumor_size_cm * 10))} mm.")
    if "grade" in stated:
        if ph.grade == "GX" or rng.random() < 0.5:
            out.append(f"Histologic grade {ph.grade}.")
        else:
            out.append(f"Nottingham histologic grade {ph.grade[1]}.")
    if "ecog" in stated:
        out.append(f"ECOG performance status {ph.ecog}.")
    if "karnofsky" in stated:
        out.append(f"Karnofsky score {ph.karnofsky}.")
    bio = [f for f in ("er", "pr", "her2") if f in stated]
    if bio:
        if rng.random() < 0.5:
            labels = {"er": "ER", "pr": "PR", "her2": "HER2"}
            out.append("Receptor status: " + ", ".join(f"{labels[f]}{_sign(getattr(ph, f))}" for f in bio) + ".")
        else:
            labels = {"er": "Estrogen receptor", "pr": "Progesterone receptor", "her2": "HER2"}
            out.append(" ".join(f"{labels[f]} {getattr(ph, f)}." for f in bio))
    return out


def _gold_phenotype(ph: PhenotypeRecord, stated: set[str]) -> dict:
    rec = PhenotypeRecord()
    for f in stated:
        setattr(rec, f, getattr(ph, f))
    return rec.to_dict()


def _gold_outcome(flags: set[str], event_date: dt.date | None = None) -> dict:
    rec = OutcomeRecord()
    for f in flags:
        group, name = f.split(".")
        setattr(getattr(rec, group), name, True)
    if event_date is not None:
        rec.death_hospice.event_date = event_date.isoformat()
    return rec.to_dict()


def _plan(rng, pid: str, start: dt.date, drugs: tuple[str, ...], codes: dict[str, str], unlisted: bool) -> TreatmentPlan:
    items = []
    for name in drugs:
        dose, unit, weeks = DOSING[name]
        items.append(PlanDrug(codes[name], name, dose * weeks, unit, weeks))
    if unlisted:
        items.append(PlanDrug(UNLISTED_DRUG[0], UNLISTED_DRUG[1], 100.0, "mg", 6))
    end = start + dt.timedelta(weeks=max(d.weeks for d in items))
    return TreatmentPlan(pid, start, end, items, f"{pid}-P1")


def _icd_codes(rng, table) -> list[str]:
    codes = []
    for i in rng.choice(len(table), size=int(rng.choice([0, 1, 2, 3], p=[0.4, 0.3, 0.2, 0.1])), replace=False):
        prefix = str(rng.choice(table[i][2]))
        code = prefix if len(prefix) > 3 else prefix + "0"
        codes.append(code[:3] + "." + code[3:])
    return codes


def _note(pid: str, k: int, date: dt.date, kind: str, lines: list[str]) -> ClinicalNote:
    text = preprocess_note("\n".join(lines))
    return ClinicalNote(pid, f"{pid}-N{k:02d}", date, kind, text)


def synthesize_patient(rng, index: int, base_date: dt.date, codes: dict[str, str], icd_table) -> SyntheticPatient:
    pid = f"P{index:05d}"
    ph = _phenotype(rng)
    combos = list(REGIMENS)
    weights = np.array([REGIMENS[c] for c in combos], dtype=float)
    drugs = combos[int(rng.choice(len(combos), p=weights / weights.sum()))]
    unlisted = rng.random() < 0.03
    start = base_date + dt.timedelta(days=int(rng.integers(0, 1460)))
    plan = _plan(rng, pid, start, drugs, codes, unlisted)

    age = float(np.clip(round(rng.normal(57, 11)), 25, 90))
    bsa = round(float(np.clip(rng.normal(1.8, 0.18), 1.3, 2.5)), 2)

    # hazard model
    stage_rank = STAGE_GROUPS.index(ph.stage_group)
    lp = (
        0.28 * stage_rank
        + 0.55 * ph.ecog
        + (0.7 if ph.er == "negative" and ph.her2 == "negative" else 0.0)
        + REGIMEN_EFFECT[drugs]
        + 0.02 * (age - 57)
    )
    t_fail = 900.0 * (rng.exponential() / np.exp(lp - 2.0)) ** (1 / 1.3)
    t_cens = float(rng.uniform(180, 1400))
    event = t_fail <= t_cens
    horizon = int(max(1, np.ceil(min(t_fail, t_cens))))

    # which phenotype fields the notes state, and which the EMR holds
    fields = ["t_stage", "n_stage", "m_stage", "stage_group", "tumor_size_cm", "grade", "ecog", "karnofsky", "er", "pr", "her2"]
    stated = {f for f in fields if rng.random() < 0.85}
    if not {"t_stage", "n_stage", "m_stage"} <= stated:
        stated -= {"t_stage", "n_stage", "m_stage"}
    emr_pheno = {f: (getattr(ph, f) if rng.random() < 0.4 else None) for f in fields if f != "tumor_size_cm"}

    notes, gold = [], []
    k = 0
    words = [d.replace(" HCl", "").lower() for d in drugs]
    drug_word = words[0]
    admission = ["HPI:", f"{int(age)} year old patient seen to start {' and '.join(words)}."]
    admission += _phenotype_sentences(rng, ph, stated)
    admission += ["", "Plan:", str(rng.choice(_FILLER)), "Consent for chemotherapy obtained."]
    notes.append(_note(pid, k, start, "admission", admission))
    gold.append((notes[-1].note_id, "phenotype", _gold_phenotype(ph, stated)))
    gold.append((notes[-1].note_id, "outcome", _gold_outcome(set())))

    # follow-up notes up to the horizon
    day, cycle = 0, 1
    while True:
        day += int(rng.integers(30, 90))
        if day >= horizon:
            break
        k += 1
        cycle += 1
        lines = ["Interval history:", f"Seen for cycle {cycle}.", str(rng.choice(_FILLER))]
        flags: set[str] = set()
        r = rng.random()
        if r < 0.25:
            lines.append(str(rng.choice(_NEGATED)))
        elif r < 0.4:
            s, f = _SOFT_EVENTS[int(rng.integers(len(_SOFT_EVENTS)))]
            lines.append(s)
            flags |= f
        lines += ["", "Plan:", "Continue current regimen."]
        notes.append(_note(pid, k, start + dt.timedelta(days=day), "progress", lines))
        gold.append((notes[-1].note_id, "phenotype", PhenotypeRecord().to_dict()))
        gold.append((notes[-1].note_id, "outcome", _gold_outcome(flags)))

    event_date, kind = None, None
    k += 1
    if event:
        event_date = start + dt.timedelta(days=horizon)
        kind = str(rng.choice(["progression", "toxicity", "death", "hospice"], p=[0.45, 0.3, 0.15, 0.1]))
        stated_date = None
        note_date = event_date
        if kind == "progression":
            s = str(rng.choice(_PROGRESSION)).format(drug=drug_word)
            flags = {"progression.progressed", "progression.discontinued"}
        elif kind == "toxicity":
            s = str(rng.choice(_TOXICITY)).format(drug=drug_word, cycle=cycle)
            s = s[0].upper() + s[1:]
            flags = {"toxicity.adverse_effects", "toxicity.discontinued_or_modified"}
        else:
            tmpl = _DEATH if kind == "death" else _HOSPICE
            s = str(rng.choice(tmpl)).format(date=_iso_or_us(rng, event_date))
            flags = {"death_hospice.died" if kind == "death" else "death_hospice.hospice"}
            stated_date = event_date
            note_date = event_date + dt.timedelta(days=int(rng.integers(0, 6)))
        lines = ["Interval history:", s, "", "Plan:", str(rng.choice(_FILLER))]
        notes.append(_note(pid, k, note_date, "progress", lines))
        gold.append((notes[-1].note_id, "outcome", _gold_outcome(flags, stated_date)))
    else:
        lines = ["Interval history:", "Stable disease on current therapy.", str(rng.choice(_FILLER)), "", "Plan:", "Continue surveillance."]
        notes.append(_note(pid, k, start + dt.timedelta(days=horizon), "progress", lines))
        gold.append((notes[-1].note_id, "outcome", _gold_outcome(set())))
    gold.append((notes[-1].note_id, "phenotype", PhenotypeRecord().to_dict()))

    emr = {
        "patient_id": pid,
        "age": int(age),
        "gender": "F" if rng.random() < 0.99 else "M",
        "bsa": bsa if rng.random() > 0.02 else None,
        "srcr": round(float(np.clip(rng.normal(0.85, 0.2), 0.4, 2.5)), 2),
        "readmission_score": int(rng.integers(0, 25)),
        "icd10_codes": ";".join(_icd_codes(rng, icd_table)),
        **emr_pheno,
    }
    return SyntheticPatient(pid, ph, plan, notes, gold, emr, bool(event), event_date, kind)


def synthesize_cohort(n_patients: int, seed: int = 0, base_date: dt.date = dt.date(2015, 1, 1)) -> SyntheticCohort:
    if n_patients < 1:
        raise ValueError("n_patients must be >= 1")
    rng = np.random.default_rng(seed)
    codes = {d.name: d.gpi for d in load_approved_drugs()}
    table = elixhauser_table()
    return SyntheticCohort([synthesize_patient(rng, i + 1, base_date, codes, table) for i in range(n_patients)])


def write_cohort(cohort: SyntheticCohort, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": out / "notes.jsonl",
        "emr": out / "emr.csv",
        "plans": out / "plans.csv",
        "gold": out / "gold.jsonl",
        "truth": out / "truth.jsonl",
    }
    write_corpus(cohort.notes, paths["corpus"])
    write_emr_csv([p.emr for p in cohort.patients], paths["emr"])
    write_plans_csv(cohort.plans, paths["plans"])
    with open(paths["gold"], "w", encoding="utf-8") as fh:
        for note_id, target, rec in cohort.gold:
            fh.write(json.dumps({"note_id": note_id, "target": target, "record": rec}, sort_keys=True) + "\n")
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        for p in cohort.patients:
            row = {
                "patient_id": p.patient_id,
                "event": p.event,
                "event_date": p.event_date.isoformat() if p.event_date else None,
                "failure_kind": p.failure_kind,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return paths


# -- needle notes for retrieval checks ----------------------------------------

_NEEDLE_FILLER = [
    "The patient reports walking daily and tolerating meals.",
    "Social history reviewed; lives with spouse and two children.",
    "Family history notable for hypertension in a parent.",
    "Review of systems otherwise negative for fever or chills.",
    "Lungs clear to auscultation bilaterally.",
    "Heart with regular rate and rhythm, no murmur.",
    "Abdomen soft and non-tender.",
    "Extremities without edema.",
    "Skin without rash or lesions.",
    "Neurologic exam grossly non-focal.",
    "Discussed nutrition and exercise at length.",
    "Insurance paperwork completed today.",
    "Performance at work has been steady.",
    "Status of home care services confirmed.",
]


def needle_note(rng, index: int, min_tokens: int = 30000) -> tuple[ClinicalNote, str]:
    """A long note with one phenotype sentence buried at a random position."""
    from .corpus import count_tokens

    needle = (
        f"Pathology: stage {rng.choice(['IIA', 'IIIB', 'IV'])} tumor, {rng.choice(['T2', 'T3'])} N1 M0, "
        f"grade {rng.integers(1, 4)}, estrogen receptor ER {rng.choice(['positive', 'negative'])}, "
        f"progesterone receptor PR negative, HER2 negative, ECOG performance status 1."
    )
    lines = []
    n = 0
    while n < min_tokens:
        s = str(rng.choice(_NEEDLE_FILLER))
        lines.append(s)
        n += count_tokens(s)
    lines.insert(int(rng.integers(0, len(lines))), needle)
    text = preprocess_note(" ".join(lines))
    return ClinicalNote(f"N{index:04d}", f"N{index:04d}-1", dt.date(2020, 1, 1), "other", text), needle
