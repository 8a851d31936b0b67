import json

import pytest

from chemoutcome.errors import NoJsonFound, SchemaViolation
from chemoutcome.extraction.schema import (
    OutcomeRecord,
    PhenotypeRecord,
    empty_record,
    extract_json_object,
    parse_and_validate,
    validate_dict,
)

from helpers import outcome_dict, phenotype_dict


def test_valid_phenotype_round_trip():
    d = phenotype_dict(t_stage="T2", n_stage="N0", m_stage="M0", tumor_size_cm=2.5, ecog=1, er="positive")
    rec = validate_dict(d, "phenotype/v1")
    assert isinstance(rec, PhenotypeRecord)
    assert rec.ecog == 1 and rec.er == "positive" and rec.to_dict() == d


def test_ecog_out_of_range():
    with pytest.raises(SchemaViolation) as err:
        validate_dict(phenotype_dict(ecog=9), "phenotype/v1")
    assert err.value.field == "ecog" and err.value.reason == "out of range"


@pytest.mark.parametrize(
    "over,field",
    [({"t_stage": "T9"}, "t_stage"), ({"er": "maybe"}, "er"), ({"karnofsky": 55}, "karnofsky")],
)
def test_bad_phenotype_values(over, field):
    with pytest.raises(SchemaViolation) as err:
        validate_dict(phenotype_dict(**over), "phenotype/v1")
    assert err.value.field == field


def test_missing_and_extra_keys():
    d = phenotype_dict()
    del d["grade"]
    with pytest.raises(SchemaViolation) as err:
        validate_dict(d, "phenotype/v1")
    assert (err.value.field, err.value.reason) == ("grade", "missing required key")
    with pytest.raises(SchemaViolation) as err:
        validate_dict({**phenotype_dict(), "color": "red"}, "phenotype/v1")
    assert (err.value.field, err.value.reason) == ("color", "unknown key")


def test_outcome_record():
    rec = validate_dict(outcome_dict(died=True, event_date="2021-03-07"), "outcome/v1")
    assert isinstance(rec, OutcomeRecord) and rec.death_hospice.died


def test_outcome_date_rules():
    with pytest.raises(SchemaViolation):
        validate_dict(outcome_dict(event_date="2021-03-07"), "outcome/v1")
    with pytest.raises(SchemaViolation):
        validate_dict(outcome_dict(died=True, event_date="2021-02-30"), "outcome/v1")


def test_fenced_json_parses_identically():
    d = outcome_dict(progressed=True, details=("progression on scan", "", ""))
    bare = parse_and_validate(json.dumps(d), "outcome/v1")
    fenced = parse_and_validate("Here you go:\n```json\n" + json.dumps(d) + "\n```\n", "outcome/v1")
    assert bare == fenced


def test_no_json():
    with pytest.raises(NoJsonFound):
        extract_json_object("I could not find anything.")
    assert extract_json_object("[1] then {\"a\": 1}") == {"a": 1}


def test_empty_records_validate():
    for sid in ("phenotype/v1", "outcome/v1"):
        rec = empty_record(sid)
        assert validate_dict(rec.to_dict(), sid) == rec
    with pytest.raises(KeyError):
        validate_dict({}, "nope/v1")
