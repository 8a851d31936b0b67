"""Record types, their JSON schemas, and tolerant JSON parsing of model output."""

from __future__ import annotations

import datetime as dt
import json
import re
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import jsonschema

from ..errors import NoJsonFound, SchemaViolation

T_STAGES = ["T0", "T1", "T2", "T3", "T4", "Tis", "TX"]
N_STAGES = ["N0", "N1", "N2", "N3", "NX"]
M_STAGES = ["M0", "M1", "MX"]
STAGE_GROUPS = ["0", "I", "IA", "IB", "II", "IIA", "IIB", "III", "IIIA", "IIIB", "IIIC", "IV"]
GRADES = ["G1", "G2", "G3", "G4", "GX"]
BIOMARKER = ["positive", "negative", "unknown"]


def _nullable_enum(values):
    return {"enum": list(values) + [None]}


PHENOTYPE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "PhenotypeRecord",
    "type": "object",
    "properties": {
        "t_stage": _nullable_enum(T_STAGES),
        "n_stage": _nullable_enum(N_STAGES),
        "m_stage": _nullable_enum(M_STAGES),
        "stage_group": _nullable_enum(STAGE_GROUPS),
        "tumor_size_cm": {"type": ["number", "null"], "minimum": 0, "exclusiveMaximum": 50},
        "grade": _nullable_enum(GRADES),
        "ecog": {"type": ["integer", "null"], "minimum": 0, "maximum": 5},
        "karnofsky": {"type": ["integer", "null"], "minimum": 0, "maximum": 100, "multipleOf": 10},
        "er": {"enum": BIOMARKER},
        "pr": {"enum": BIOMARKER},
        "her2": {"enum": BIOMARKER},
    },
    "additionalProperties": False,
}
PHENOTYPE_SCHEMA["required"] = list(PHENOTYPE_SCHEMA["properties"])


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "required": list(props), "additionalProperties": False}


OUTCOME_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "OutcomeRecord",
    **_obj(
        {
            "progression": _obj(
                {
                    "progressed": {"type": "boolean"},
                    "discontinued": {"type": "boolean"},
                    "details": {"type": "string"},
                }
            ),
            "toxicity": _obj(
                {
                    "adverse_effects": {"type": "boolean"},
                    "qol_deterioration": {"type": "boolean"},
                    "discontinued_or_modified": {"type": "boolean"},
                    "details": {"type": "string"},
                }
            ),
            "death_hospice": _obj(
                {
                    "died": {"type": "boolean"},
                    "hospice": {"type": "boolean"},
                    "event_date": {"type": ["string", "null"], "pattern": r"^\d{4}-\d{2}-\d{2}$"},
                    "details": {"type": "string"},
                }
            ),
        }
    ),
}


@dataclass
class PhenotypeRecord:
    t_stage: Optional[str] = None
    n_stage: Optional[str] = None
    m_stage: Optional[str] = None
    stage_group: Optional[str] = None
    tumor_size_cm: Optional[float] = None
    grade: Optional[str] = None
    ecog: Optional[int] = None
    karnofsky: Optional[int] = None
    er: str = "unknown"
    pr: str = "unknown"
    her2: str = "unknown"

    schema_id = "phenotype/v1"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhenotypeRecord":
        return cls(**d)


@dataclass
class Progression:
    progressed: bool = False
    discontinued: bool = False
    details: str = ""


@dataclass
class Toxicity:
    adverse_effects: bool = False
    qol_deterioration: bool = False
    discontinued_or_modified: bool = False
    details: str = ""


@dataclass
class DeathHospice:
    died: bool = False
    hospice: bool = False
    event_date: Optional[str] = None
    details: str = ""


@dataclass
class OutcomeRecord:
    progression: Progression = field(default_factory=Progression)
    toxicity: Toxicity = field(default_factory=Toxicity)
    death_hospice: DeathHospice = field(default_factory=DeathHospice)

    schema_id = "outcome/v1"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeRecord":
        return cls(
            Progression(**d["progression"]),
            Toxicity(**d["toxicity"]),
            DeathHospice(**d["death_hospice"]),
        )


Record = Union[PhenotypeRecord, OutcomeRecord]

SCHEMAS = {
    "phenotype/v1": (PHENOTYPE_SCHEMA, PhenotypeRecord),
    "outcome/v1": (OUTCOME_SCHEMA, OutcomeRecord),
}
TARGET_SCHEMA = {"phenotype": "phenotype/v1", "outcome": "outcome/v1"}

_VALIDATORS = {sid: jsonschema.Draft202012Validator(s) for sid, (s, _) in SCHEMAS.items()}
_FENCE = re.compile(r"```(?:json|JSON)?")


def schema_text(schema_id: str) -> str:
    return json.dumps(SCHEMAS[schema_id][0], indent=1, sort_keys=False)


def extract_json_object(raw: str) -> dict:
    """Return the first JSON object embedded in ``raw``.

    Code fences and any surrounding prose are ignored.
    """
    text = _FENCE.sub(" ", raw)
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise NoJsonFound("no JSON object found in model output")


_REASONS = {
    "maximum": "out of range",
    "minimum": "out of range",
    "exclusiveMaximum": "out of range",
    "exclusiveMinimum": "out of range",
    "multipleOf": "not a multiple of {validator_value}",
    "enum": "value not in allowed set",
    "type": "wrong type (expected {validator_value})",
    "pattern": "does not match {validator_value}",
}


def _violation(err: jsonschema.ValidationError, schema: dict) -> SchemaViolation:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        return SchemaViolation(".".join(filter(None, [path, missing[0]])), "missing required key")
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        return SchemaViolation(".".join(filter(None, [path, extra[0]])), "unknown key")
    reason = _REASONS.get(err.validator, err.message)
    return SchemaViolation(path or "<root>", reason.format(validator_value=err.validator_value))


def validate_dict(obj: dict, schema_id: str) -> Record:
    if schema_id not in SCHEMAS:
        raise KeyError(f"unregistered schema {schema_id!r}")
    schema, cls = SCHEMAS[schema_id]
    errors = sorted(_VALIDATORS[schema_id].iter_errors(obj), key=lambda e: (list(map(str, e.absolute_path)), e.validator))
    if errors:
        raise _violation(errors[0], schema)
    if cls is PhenotypeRecord:
        obj = dict(obj)
        for f in ("ecog", "karnofsky"):
            if obj[f] is not None:
                obj[f] = int(obj[f])
        if obj["tumor_size_cm"] is not None:
            obj["tumor_size_cm"] = float(obj["tumor_size_cm"])
    rec = cls.from_dict(obj)
    if cls is OutcomeRecord:
        dh = rec.death_hospice
        if dh.event_date is not None:
            if not (dh.died or dh.hospice):
                raise SchemaViolation("death_hospice.event_date", "date given without death or hospice")
            try:
                dt.date.fromisoformat(dh.event_date)
            except ValueError:
                raise SchemaViolation("death_hospice.event_date", "not a calendar date") from None
    return rec


def parse_and_validate(raw: str, schema_id: str) -> Record:
    return validate_dict(extract_json_object(raw), schema_id)


def empty_record(schema_id: str) -> Record:
    return SCHEMAS[schema_id][1]()
