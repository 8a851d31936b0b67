import pytest
from hypothesis import given
from hypothesis import strategies as st

from chemoutcome.errors import AlignmentError, EmptyPopulation
from chemoutcome.extraction.evaluate import evaluate_extractions
from chemoutcome.extraction.schema import validate_dict
from chemoutcome.metrics import ConfusionCounts, f1_per_class, metrics_from_confusion

from helpers import outcome_dict, phenotype_dict


def test_balanced_counts():
    m = metrics_from_confusion(ConfusionCounts(tp=50, tn=50))
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_undefined_precision():
    m = metrics_from_confusion(ConfusionCounts(tn=5, fn=3))
    assert m.precision is None and "precision" in m.undefined
    assert m.recall == 0.0 and m.f1 == 0.0


def test_table_counts():
    m = metrics_from_confusion(ConfusionCounts(tp=179, fp=46))
    assert m.precision == pytest.approx(179 / 225, abs=1e-12)


def test_empty_population():
    with pytest.raises(EmptyPopulation):
        metrics_from_confusion(ConfusionCounts())
    with pytest.raises(ValueError):
        ConfusionCounts(tp=-1)


def test_all_positive_predictor():
    labels = [1] * 5 + [0] * 5
    r = f1_per_class([1] * 10, labels)
    assert r.f1_pos == pytest.approx(2 / 3) and r.f1_neg == 0.0
    assert "precision_neg_undefined" in r.flags


def test_length_mismatch():
    with pytest.raises(AlignmentError):
        ConfusionCounts.from_lists([1, 0], [1])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_label_swap_symmetry(pairs):
    preds, labels = [p for p, _ in pairs], [y for _, y in pairs]
    a = f1_per_class(preds, labels)
    b = f1_per_class([1 - p for p in preds], [1 - y for y in labels])
    assert (a.f1_pos, a.f1_neg) == (b.f1_neg, b.f1_pos)


def test_extraction_scoring():
    gold = [
        ("N1", "outcome", validate_dict(outcome_dict(progressed=True), "outcome/v1")),
        ("N2", "outcome", validate_dict(outcome_dict(), "outcome/v1")),
        ("N1", "phenotype", validate_dict(phenotype_dict(er="positive", ecog=1), "phenotype/v1")),
    ]
    pred = [
        ("N1", "outcome", validate_dict(outcome_dict(progressed=True), "outcome/v1")),
        ("N2", "outcome", validate_dict(outcome_dict(died=True), "outcome/v1")),
        ("N1", "phenotype", validate_dict(phenotype_dict(er="negative", ecog=1), "phenotype/v1")),
    ]
    res = evaluate_extractions(pred, gold)
    assert res["labels"]["progression.progressed"]["tp"] == 1
    assert res["labels"]["death_hospice.died"]["fp"] == 1
    assert res["labels"]["er"]["fp"] == 1 and res["labels"]["ecog"]["tp"] == 1
    assert res["micro"]["tp"] == 2 and res["micro"]["fp"] == 2
    cats = res["categories"]
    assert cats["progression"]["tp"] == 1 and cats["death"]["fp"] == 1


def test_extraction_scoring_alignment():
    g = [("N1", "outcome", validate_dict(outcome_dict(), "outcome/v1"))]
    with pytest.raises(AlignmentError):
        evaluate_extractions([], g)
