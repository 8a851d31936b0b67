"""Categorical mapping tables for the feature matrix.

Every table is invertible. Missing values encode to ``MISSING`` and
"not assessable" stages/grades (TX, NX, MX, GX) to ``NOT_ASSESSED`` so that
neither is confused with a real zero.
"""

from __future__ import annotations

MISSING = -1.0
NOT_ASSESSED = -2.0

T_STAGE = {"T0": 0, "Tis": 1, "T1": 2, "T2": 3, "T3": 4, "T4": 5, "TX": NOT_ASSESSED}
N_STAGE = {"N0": 0, "N1": 1, "N2": 2, "N3": 3, "NX": NOT_ASSESSED}
M_STAGE = {"M0": 0, "M1": 1, "MX": NOT_ASSESSED}
STAGE_GROUP = {
    "0": 0, "I": 1, "IA": 2, "IB": 3, "II": 4, "IIA": 5, "IIB": 6,
    "III": 7, "IIIA": 8, "IIIB": 9, "IIIC": 10, "IV": 11,
}
GRADE = {"G1": 1, "G2": 2, "G3": 3, "G4": 4, "GX": NOT_ASSESSED}
BIOMARKER = {"positive": 1, "negative": 0}  # "unknown" -> MISSING
GENDER = {"F": 0, "M": 1, "O": 2}

TABLES = {
    "t_stage": T_STAGE,
    "n_stage": N_STAGE,
    "m_stage": M_STAGE,
    "stage_group": STAGE_GROUP,
    "grade": GRADE,
    "er": BIOMARKER,
    "pr": BIOMARKER,
    "her2": BIOMARKER,
    "gender": GENDER,
}

_GENDER_ALIASES = {"f": "F", "female": "F", "m": "M", "male": "M", "o": "O", "other": "O"}


def normalize_gender(value) -> str | None:
    if value is None:
        return None
    return _GENDER_ALIASES.get(str(value).strip().lower())


def encode(table: str, value) -> float:
    if value is None or value == "" or (table in ("er", "pr", "her2") and value == "unknown"):
        return MISSING
    mapping = TABLES[table]
    if value not in mapping:
        raise KeyError(f"{value!r} is not a valid {table} value")
    return float(mapping[value])


def decode(table: str, code: float):
    if code == MISSING:
        return "unknown" if table in ("er", "pr", "her2") else None
    for k, v in TABLES[table].items():
        if float(v) == float(code):
            return k
    raise KeyError(f"{code!r} is not a valid {table} code")


def encode_numeric(value) -> float:
    return MISSING if value is None else float(value)
