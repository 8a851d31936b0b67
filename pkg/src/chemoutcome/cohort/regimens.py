"""Drug matching and regimen-combination catalog with support filtering."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from .outcomes import TreatmentPlan

log = logging.getLogger(__name__)

OTHER_DRUG = "drug:other"


@dataclass(frozen=True)
class ApprovedDrug:
    gpi: str  # up to 8 characters, used as a prefix
    name: str


def load_approved_drugs(path: str | Path | None = None) -> list[ApprovedDrug]:
    if path is None:
        text = resources.files("chemoutcome.data").joinpath("approved_drugs.csv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(rows[0]) != {"gpi8", "name"}:
        raise ValueError(f"drug list header must be gpi8,name; got {sorted(rows[0])}")
    drugs = []
    for r in rows:
        code = r["gpi8"].strip()
        if not 1 <= len(code) <= 8:
            raise ValueError(f"GPI prefix {code!r} must have 1-8 characters")
        drugs.append(ApprovedDrug(code, r["name"].strip()))
    return drugs


def match_drug(gpi8: str, approved: Sequence[ApprovedDrug]) -> str | None:
    """Name of the approved drug with the longest GPI prefix of ``gpi8``."""
    best = None
    for d in approved:
        if gpi8.startswith(d.gpi) and (best is None or len(d.gpi) > len(best.gpi)):
            best = d
    return best.name if best else None


def combo_name(drugs) -> str:
    return "+".join(sorted(drugs))


@dataclass
class RegimenCatalog:
    combinations: dict[str, int]  # every observed combination -> patient support
    support_threshold: int
    approved_drugs: list[ApprovedDrug]
    drugs: list[str] = field(default_factory=list)  # observed approved drugs

    @property
    def retained(self) -> list[str]:
        return sorted(c for c, n in self.combinations.items() if n >= self.support_threshold)

    @property
    def columns(self) -> list[str]:
        return [f"regimen:{c}" for c in self.retained] + [f"drug:{d}" for d in self.drugs] + [OTHER_DRUG]

    def plan_drugs(self, plan: TreatmentPlan) -> tuple[set[str], bool]:
        """(matched approved drug names, has_unknown)."""
        names, unknown = set(), False
        for d in plan.drugs:
            name = match_drug(d.gpi8, self.approved_drugs)
            if name is None:
                unknown = True
            else:
                names.add(name)
        return names, unknown

    def vector(self, plan: TreatmentPlan) -> dict[str, int]:
        names, unknown = self.plan_drugs(plan)
        combo = combo_name(names) if names else None
        vec = {f"regimen:{c}": int(c == combo) for c in self.retained}
        vec.update({f"drug:{d}": int(d in names) for d in self.drugs})
        vec[OTHER_DRUG] = int(unknown)
        return vec


def build_regimen_features(
    plans: Sequence[TreatmentPlan], approved: Sequence[ApprovedDrug], support_threshold: int = 20
) -> tuple[RegimenCatalog, dict[str, dict[str, int]]]:
    """Count combination support over patients and one-hot encode each plan.

    A combination is the sorted set of a plan's distinct approved drugs;
    combinations below the threshold get no column, but their drugs keep
    individual flags. Unmatched GPI codes go to ``drug:other``.
    """
    catalog = RegimenCatalog({}, support_threshold, list(approved))
    support: Counter = Counter()
    seen_drugs: set[str] = set()
    for plan in plans:
        names, unknown = catalog.plan_drugs(plan)
        if unknown:
            bad = [d.gpi8 for d in plan.drugs if match_drug(d.gpi8, approved) is None]
            log.warning("patient %s: unknown drug code(s) %s", plan.patient_id, bad)
        if names:
            support[combo_name(names)] += 1
            seen_drugs |= names
    catalog.combinations = dict(sorted(support.items()))
    catalog.drugs = sorted(seen_drugs)
    return catalog, {p.patient_id: catalog.vector(p) for p in plans}
