"""Corpus-level extraction: chunk, retrieve, prompt, validate."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from ..corpus import ClinicalNote, CorpusConfig, chunk_note
from ..errors import BackendError, ExtractionFailed, PromptTooLong
from ..retrieval import QUERIES, RetrievalConfig, retrieve_top_k
from .critic import CriticVerdict, extract_with_critic
from .prompt import ExtractionRequest, Shot, load_shots
from .schema import Record

log = logging.getLogger(__name__)

TARGETS = ("phenotype", "outcome")


@dataclass
class NoteExtraction:
    patient_id: str
    note_id: str
    note_date: str
    target: str
    record: Record | None
    verdict: CriticVerdict | None
    attempts: int
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "note_id": self.note_id,
            "note_date": self.note_date,
            "target": self.target,
            "record": self.record.to_dict() if self.record is not None else None,
            "verdict": self.verdict.to_dict() if self.verdict is not None else None,
            "attempts": self.attempts,
            "error": self.error,
        }


def extract_note(
    note: ClinicalNote,
    target: str,
    backend,
    embedder,
    shots: Sequence[Shot],
    corpus_cfg: CorpusConfig = CorpusConfig(),
    retrieval_cfg: RetrievalConfig = RetrievalConfig(),
    max_retries: int = 3,
) -> NoteExtraction:
    date = note.note_date.isoformat()
    try:
        chunks = chunk_note(note, corpus_cfg)
        scored = retrieve_top_k(QUERIES[target], chunks, embedder, retrieval_cfg)
        req = ExtractionRequest(target, scored, list(shots), note_id=note.note_id, patient_id=note.patient_id)
        record, verdict, attempts = extract_with_critic(req, backend, max_retries)
    except (BackendError, PromptTooLong) as exc:
        if not isinstance(exc, ExtractionFailed) and isinstance(exc, BackendError):
            exc = ExtractionFailed(note.note_id, exc)
        log.error("note %s (%s): %s", note.note_id, target, exc)
        return NoteExtraction(note.patient_id, note.note_id, date, target, None, None, 0, f"{type(exc).__name__}: {exc}")
    return NoteExtraction(note.patient_id, note.note_id, date, target, record, verdict, attempts)


def extract_corpus(
    notes: Sequence[ClinicalNote],
    backend,
    embedder,
    targets: Sequence[str] = TARGETS,
    k_shots: int = 3,
    corpus_cfg: CorpusConfig = CorpusConfig(),
    retrieval_cfg: RetrievalConfig = RetrievalConfig(),
    max_retries: int = 3,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> list[NoteExtraction]:
    """Extract every target from every note. Output order follows the input.

    Failures are returned as entries with ``error`` set rather than raised,
    so one bad note does not lose the rest of the run.
    """
    shots = {t: load_shots(t, k_shots) for t in targets}
    jobs = [(n, t) for n in notes for t in targets]

    def run(job):
        n, t = job
        return extract_note(n, t, backend, embedder, shots[t], corpus_cfg, retrieval_cfg, max_retries)

    out = []
    if workers <= 1:
        for i, job in enumerate(jobs, 1):
            out.append(run(job))
            if progress:
                progress(i, len(jobs))
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, res in enumerate(pool.map(run, jobs), 1):
            out.append(res)
            if progress:
                progress(i, len(jobs))
    return out
