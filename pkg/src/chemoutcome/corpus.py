"""Clinical note ingestion, cleanup, tokenization and chunking."""

from __future__ import annotations

import datetime as dt
import json
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

from .errors import CorpusFormatError, EmptyNote

log = logging.getLogger(__name__)

NOTE_TYPES = ("admission", "progress", "other")
NOTE_FIELDS = ("patient_id", "note_id", "note_date", "note_type", "text")

_TOKEN_PATTERNS = {
    "whitespace": re.compile(r"\S+"),
    "unicode-word": re.compile(r"\w+|[^\w\s]"),
}
_SENTENCE_END = re.compile(r"[.!?;:]$")


@dataclass(frozen=True)
class ClinicalNote:
    patient_id: str
    note_id: str
    note_date: dt.date
    note_type: str
    text: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["note_date"] = self.note_date.isoformat()
        return d


@dataclass(frozen=True)
class Chunk:
    note_id: str
    chunk_index: int
    text: str
    token_count: int

    @property
    def chunk_id(self) -> str:
        return f"{self.note_id}#{self.chunk_index}"


@dataclass(frozen=True)
class CorpusConfig:
    chunk_size_limit: int = 2500
    chunk_overlap: int = 128
    tokenizer: str = "unicode-word"

    def __post_init__(self):
        if self.tokenizer not in _TOKEN_PATTERNS:
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")
        if self.chunk_size_limit < 1:
            raise ValueError("chunk_size_limit must be positive")
        if not 0 <= self.chunk_overlap < self.chunk_size_limit:
            raise ValueError("need 0 <= chunk_overlap < chunk_size_limit")


def preprocess_note(raw: str) -> str:
    """Normalize whitespace and drop consecutive duplicate lines and sections.

    Sections are blocks separated by one or more blank lines. Inside a line,
    runs of whitespace collapse to a single space. The result keeps one blank
    line between sections so downstream chunking can still see them.
    """
    sections: list[list[str]] = []
    current: list[str] = []
    for line in raw.splitlines():
        line = " ".join(line.split())
        if not line:
            if current:
                sections.append(current)
                current = []
            continue
        if current and current[-1] == line:
            continue
        current.append(line)
    if current:
        sections.append(current)

    deduped: list[list[str]] = []
    for sec in sections:
        if not deduped or deduped[-1] != sec:
            deduped.append(sec)

    text = "\n\n".join("\n".join(sec) for sec in deduped)
    if not text.strip():
        raise EmptyNote("note is empty after preprocessing")
    return text


def _token_spans(text: str, tokenizer: str) -> list[tuple[int, int]]:
    return [m.span() for m in _TOKEN_PATTERNS[tokenizer].finditer(text)]


def tokenize(text: str, tokenizer: str = "unicode-word") -> list[str]:
    return _TOKEN_PATTERNS[tokenizer].findall(text)


def count_tokens(text: str, tokenizer: str = "unicode-word") -> int:
    return sum(1 for _ in _TOKEN_PATTERNS[tokenizer].finditer(text))


def _boundary_flags(text: str, spans: list[tuple[int, int]]) -> list[bool]:
    # flags[i]: token i starts a new sentence or line
    flags = [True]
    for (s0, e0), (s1, _) in zip(spans, spans[1:]):
        gap = text[e0:s1]
        flags.append("\n" in gap or bool(_SENTENCE_END.search(text[s0:e0])))
    return flags


def chunk_note(note: ClinicalNote | str, cfg: CorpusConfig = CorpusConfig()) -> list[Chunk]:
    """Split a preprocessed note into token-bounded, overlapping chunks.

    Chunks are contiguous character spans of the note; with zero overlap
    their concatenation is the note text. Cuts fall on a sentence or line
    start when one exists in the last quarter of the window.
    """
    if isinstance(note, str):
        note_id, text = "note", note
    else:
        note_id, text = note.note_id, note.text
    spans = _token_spans(text, cfg.tokenizer)
    n = len(spans)
    limit, overlap = cfg.chunk_size_limit, cfg.chunk_overlap
    if n <= limit:
        return [Chunk(note_id, 0, text, n)] if n else []

    flags = _boundary_flags(text, spans)
    step = limit - overlap
    window = max(0, min(limit // 4, step - 1))

    starts = [0]
    ends = []
    while True:
        start = starts[-1]
        end = start + limit
        if end >= n:
            ends.append(n)
            break
        for cand in range(end, end - window - 1, -1):
            if flags[cand]:
                end = cand
                break
        ends.append(end)
        starts.append(end - overlap)

    chunks = []
    for i, (s, e) in enumerate(zip(starts, ends)):
        c0 = 0 if s == 0 else spans[s][0]
        c1 = len(text) if e == n else spans[e][0]
        chunks.append(Chunk(note_id, i, text[c0:c1], e - s))
    return chunks


def _parse_note(obj, known_ids: set) -> ClinicalNote:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    keys = set(obj)
    if keys != set(NOTE_FIELDS):
        missing = sorted(set(NOTE_FIELDS) - keys)
        extra = sorted(keys - set(NOTE_FIELDS))
        raise ValueError(f"bad fields (missing={missing}, unexpected={extra})")
    for f in NOTE_FIELDS:
        if not isinstance(obj[f], str):
            raise ValueError(f"{f} must be a string")
    if obj["note_type"] not in NOTE_TYPES:
        raise ValueError(f"note_type {obj['note_type']!r} not in {NOTE_TYPES}")
    try:
        date = dt.date.fromisoformat(obj["note_date"])
    except ValueError:
        raise ValueError(f"note_date {obj['note_date']!r} is not an ISO-8601 date") from None
    if obj["note_id"] in known_ids:
        raise ValueError(f"duplicate note_id {obj['note_id']!r}")
    text = preprocess_note(obj["text"])
    return ClinicalNote(obj["patient_id"], obj["note_id"], date, obj["note_type"], text)


def read_corpus(path: str | Path, lenient: bool = False) -> list[ClinicalNote]:
    """Load a JSONL corpus. Invalid lines are fatal unless ``lenient``."""
    notes: list[ClinicalNote] = []
    seen: set = set()
    errors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                note = _parse_note(json.loads(line), seen)
            except (ValueError, EmptyNote) as exc:
                errors.append((lineno, str(exc)))
                continue
            seen.add(note.note_id)
            notes.append(note)
    if errors:
        if not lenient:
            raise CorpusFormatError(errors)
        for lineno, msg in errors:
            log.warning("skipping corpus line %d: %s", lineno, msg)
    return notes


def write_corpus(notes: Iterable[ClinicalNote], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for note in notes:
            fh.write(json.dumps(note.to_dict(), ensure_ascii=False) + "\n")
