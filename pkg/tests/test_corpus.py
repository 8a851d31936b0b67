import json
import math

import pytest

from chemoutcome.corpus import (
    ClinicalNote,
    CorpusConfig,
    chunk_note,
    count_tokens,
    preprocess_note,
    read_corpus,
    tokenize,
    write_corpus,
)
from chemoutcome.errors import CorpusFormatError, EmptyNote


def test_preprocess_drops_consecutive_duplicate_lines():
    assert preprocess_note("Line A\nLine A\nLine B") == "Line A\nLine B"


def test_preprocess_collapses_whitespace():
    assert preprocess_note("  a  b  ") == "a b"


def test_preprocess_repeated_section():
    raw = "HPI:\nSeen today.\n\nHPI:\nSeen today.\n\nPlan:\nContinue."
    out = preprocess_note(raw)
    assert out == "HPI:\nSeen today.\n\nPlan:\nContinue."
    assert len(out.split("\n\n")) == 2


def test_preprocess_empty_raises():
    with pytest.raises(EmptyNote):
        preprocess_note(" \n\t\n")


def test_tokenize_basics():
    assert tokenize("") == []
    assert tokenize("T2 N0 M0", "whitespace") == ["T2", "N0", "M0"]
    assert tokenize("ER+, PR-") == ["ER", "+", ",", "PR", "-"]


def test_whitespace_count_matches_str_split():
    para = "The patient, a 54 year old, returns for cycle 3.\nNo new complaints today."
    assert count_tokens(para, "whitespace") == len(para.split())


def test_short_note_is_one_chunk():
    text = " ".join(f"w{i}" for i in range(100))
    chunks = chunk_note(text)
    assert len(chunks) == 1 and chunks[0].text == text and chunks[0].token_count == 100


def test_zero_overlap_partition():
    text = " ".join(f"w{i}" for i in range(10))
    chunks = chunk_note(text, CorpusConfig(chunk_size_limit=4, chunk_overlap=0))
    assert [c.token_count for c in chunks] == [4, 4, 2]
    assert "".join(c.text for c in chunks) == text


def test_chunk_count_closed_form():
    n, limit, overlap = 6000, 2500, 128
    text = " ".join(f"w{i}" for i in range(n))  # no sentence or line boundaries
    chunks = chunk_note(text, CorpusConfig(limit, overlap))
    assert len(chunks) == math.ceil((n - overlap) / (limit - overlap))
    assert all(c.token_count <= limit for c in chunks)
    for a, b in zip(chunks, chunks[1:]):
        assert tokenize(a.text)[-overlap:] == tokenize(b.text)[:overlap]


def test_chunks_prefer_sentence_starts():
    sent = "one two three four five six seven eight nine."
    text = " ".join([sent] * 100)  # 10 tokens per sentence
    chunks = chunk_note(text, CorpusConfig(chunk_size_limit=95, chunk_overlap=0))
    for c in chunks[1:]:
        assert c.text.startswith("one")


def test_chunk_ids():
    note = ClinicalNote("P1", "N1", __import__("datetime").date(2020, 1, 1), "progress", "a " * 30)
    chunks = chunk_note(note, CorpusConfig(10, 2))
    assert [c.chunk_id for c in chunks][:2] == ["N1#0", "N1#1"]


def test_config_validation():
    with pytest.raises(ValueError):
        CorpusConfig(chunk_size_limit=10, chunk_overlap=10)
    with pytest.raises(ValueError):
        CorpusConfig(tokenizer="bpe")


def _line(**over):
    d = {"patient_id": "P1", "note_id": "N1", "note_date": "2020-01-02", "note_type": "progress", "text": "Seen."}
    d.update(over)
    return json.dumps(d)


def test_read_corpus_round_trip(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(_line() + "\n" + _line(note_id="N2", text="a  b\na  b") + "\n")
    notes = read_corpus(p)
    assert [n.note_id for n in notes] == ["N1", "N2"]
    assert notes[1].text == "a b"
    q = tmp_path / "d.jsonl"
    write_corpus(notes, q)
    assert read_corpus(q) == notes


@pytest.mark.parametrize(
    "bad",
    [
        _line(note_type="discharge"),
        _line(note_date="02/01/2020"),
        _line(text="   "),
        json.dumps({"patient_id": "P1", "note_id": "N9"}),
        "not json",
    ],
)
def test_read_corpus_rejects_bad_lines(tmp_path, bad):
    p = tmp_path / "c.jsonl"
    p.write_text(_line() + "\n" + bad + "\n")
    with pytest.raises(CorpusFormatError) as err:
        read_corpus(p)
    assert err.value.errors[0][0] == 2
    assert [n.note_id for n in read_corpus(p, lenient=True)] == ["N1"]


def test_read_corpus_duplicate_ids(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(_line() + "\n" + _line() + "\n")
    with pytest.raises(CorpusFormatError):
        read_corpus(p)
