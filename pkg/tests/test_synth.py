import filecmp
import time

import numpy as np

from chemoutcome.corpus import read_corpus
from chemoutcome.extraction import rules
from chemoutcome.extraction.critic import ground_check
from chemoutcome.extraction.schema import validate_dict
from chemoutcome.corpus import chunk_note, count_tokens
from chemoutcome.synth import needle_note, synthesize_cohort, weibull_cohort, write_cohort


def test_same_seed_same_files(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_cohort(synthesize_cohort(25, seed=4), a)
    write_cohort(synthesize_cohort(25, seed=4), b)
    names = sorted(p.name for p in a.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors and len(match) == len(names) >= 5
    notes = read_corpus(a / "notes.jsonl")
    assert len(notes) == len(synthesize_cohort(25, seed=4).notes)


def test_different_seed_differs():
    a = synthesize_cohort(10, seed=1).notes
    b = synthesize_cohort(10, seed=2).notes
    assert [n.text for n in a] != [n.text for n in b]


def test_gold_positives_are_grounded():
    cohort = synthesize_cohort(40, seed=8)
    notes = {n.note_id: n for n in cohort.notes}
    for note_id, target, gold in cohort.gold:
        sid = "phenotype/v1" if target == "phenotype" else "outcome/v1"
        rec = validate_dict(gold, sid)
        verdict = ground_check(rec, chunk_note(notes[note_id]))
        assert verdict.grounded, (note_id, verdict.violations)


def test_events_match_notes():
    cohort = synthesize_cohort(60, seed=5)
    rate = np.mean([p.event for p in cohort.patients])
    assert 0.2 < rate < 0.8
    for p in cohort.patients:
        if p.event:
            assert p.event_date >= p.plan.plan_start


def test_weibull_cohort_shape():
    X, t, e, names = weibull_cohort(n=500, seed=0)
    assert X.shape == (500, 5) and names[0] == "risk_flag"
    assert t.min() >= 1 and abs((1 - e.mean()) - 0.3) < 0.06
    # the flagged group fails sooner
    assert np.median(t[X[:, 0] == 1]) < np.median(t[X[:, 0] == 0])


def test_needle_note():
    rng = np.random.default_rng(0)
    note, needle = needle_note(rng, 0, min_tokens=3000)
    assert needle in note.text and count_tokens(note.text) >= 3000
    assert rules.phenotype_mentions("er", [needle]) == ["positive"]
    assert note.text.count(needle) == 1


def test_full_scale_generation_is_fast():
    start = time.perf_counter()
    cohort = synthesize_cohort(3409, seed=0)
    assert len(cohort.patients) == 3409
    assert time.perf_counter() - start < 60
