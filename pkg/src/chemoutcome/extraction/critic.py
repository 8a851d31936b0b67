"""Grounding checks and the corrective retry loop around a backend."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

from ..corpus import Chunk
from ..errors import BackendError, ExtractionFailed, NoJsonFound, SchemaViolation
from ..retrieval import ScoredChunk
from . import rules
from .prompt import ExtractionRequest, build_prompt
from .schema import OutcomeRecord, PhenotypeRecord, Record, empty_record, parse_and_validate

log = logging.getLogger(__name__)

DETAILS_MIN_OVERLAP = 0.5


@dataclass
class Violation:
    field: str
    reason: str


@dataclass
class CriticVerdict:
    valid_json: bool
    schema_ok: bool
    grounded: bool
    violations: list[Violation] = field(default_factory=list)
    attempt: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


def _texts(chunks: Sequence[Chunk | ScoredChunk]) -> list[str]:
    return [c.chunk.text if isinstance(c, ScoredChunk) else c.text for c in chunks]


def _details_supported(details: str, texts: list[str]) -> bool:
    words = [w.lower() for w in re.findall(r"\w+", details)]
    if not words:
        return True
    vocab = {w.lower() for t in texts for w in re.findall(r"\w+", t)}
    return sum(w in vocab for w in words) / len(words) >= DETAILS_MIN_OVERLAP


def _check_phenotype(rec: PhenotypeRecord, texts: list[str]) -> list[Violation]:
    out = []
    for name in rules.PHENOTYPE_PATTERNS:
        value = getattr(rec, name)
        if value is None or value == "unknown":
            continue
        found = rules.phenotype_mentions(name, texts)
        if name == "tumor_size_cm":
            ok = any(abs(value - v) < 1e-6 for v in found)
        else:
            ok = value in found
        if not ok:
            out.append(Violation(name, f"value {value!r} not stated in note text"))
    return out


def _check_outcome(rec: OutcomeRecord, texts: list[str]) -> list[Violation]:
    out = []
    for flag in rules.OUTCOME_LEXICON:
        group, name = flag.split(".")
        if getattr(getattr(rec, group), name) and not rules.lexicon_hits(flag, texts):
            out.append(Violation(flag, "no supporting text"))
    dh = rec.death_hospice
    if dh.event_date is not None:
        stated = {d for t in texts for d in rules.find_dates(t)}
        if dh.event_date not in stated:
            out.append(Violation("death_hospice.event_date", "date not stated in note text"))
    for group in ("progression", "toxicity", "death_hospice"):
        details = getattr(rec, group).details
        if details and not _details_supported(details, texts):
            out.append(Violation(f"{group}.details", "details not drawn from note text"))
    return out


def ground_check(record: Record, chunks: Sequence[Chunk | ScoredChunk], attempt: int = 1) -> CriticVerdict:
    """Flag every asserted value that no chunk supports.

    Nulls, false flags and ``unknown`` biomarkers are never flagged.
    """
    texts = _texts(chunks)
    if isinstance(record, PhenotypeRecord):
        violations = _check_phenotype(record, texts)
    else:
        violations = _check_outcome(record, texts)
    return CriticVerdict(True, True, not violations, violations, attempt)


def neutralize(record: Record, violations: Sequence[Violation]) -> Record:
    """Null out or clear every flagged field."""
    rec = type(record).from_dict(json.loads(json.dumps(record.to_dict())))
    for v in violations:
        if isinstance(rec, PhenotypeRecord):
            setattr(rec, v.field, "unknown" if v.field in ("er", "pr", "her2") else None)
            continue
        group, name = v.field.split(".")
        sub = getattr(rec, group)
        if name == "details":
            setattr(sub, name, "")
        elif name == "event_date":
            sub.event_date = None
        else:
            setattr(sub, name, False)
    if isinstance(rec, OutcomeRecord):
        dh = rec.death_hospice
        if not (dh.died or dh.hospice):
            dh.event_date = None
    return rec


def _correction_text(raw: str, verdict: CriticVerdict) -> str:
    lines = ["Your previous answer was rejected.", "Previous output:", raw.strip()[:4000], "Problems:"]
    lines += [f"- {v.field}: {v.reason}" for v in verdict.violations]
    lines.append("Re-read the note chunks and answer again. Only report values the chunks state explicitly.")
    return "\n".join(lines)


def extract_with_critic(req: ExtractionRequest, backend, max_retries: int = 3):
    """Run backend, validate, ground-check; retry with feedback until grounded.

    Returns ``(record, verdict, attempts)``. When retries run out, the last
    schema-valid record is returned with its unsupported values removed; if
    no attempt produced a valid record an all-null record is returned.
    """
    if max_retries < 1:
        raise ValueError("max_retries must be >= 1")
    limit = getattr(backend, "context_limit", None)
    correction = None
    last_record: Record | None = None
    verdict = None
    for attempt in range(1, max_retries + 1):
        built = build_prompt(req, context_limit=limit, correction=correction)
        try:
            raw = backend.complete(built.text)
        except BackendError as exc:
            raise ExtractionFailed(req.note_id, exc) from exc
        kept = [c for c in req.chunks if c.chunk.chunk_id in set(built.included)]
        try:
            record = parse_and_validate(raw, req.schema_id)
        except NoJsonFound as exc:
            verdict = CriticVerdict(False, False, False, [Violation("<root>", str(exc))], attempt)
        except SchemaViolation as exc:
            verdict = CriticVerdict(True, False, False, [Violation(exc.field, exc.reason)], attempt)
        else:
            last_record = record
            verdict = ground_check(record, kept, attempt)
            if verdict.grounded:
                return record, verdict, attempt
        log.debug("note %s attempt %d rejected: %s", req.note_id, attempt, verdict.violations)
        correction = _correction_text(raw, verdict)

    if last_record is None:
        return empty_record(req.schema_id), verdict, max_retries
    final = ground_check(last_record, req.chunks, verdict.attempt)
    cleaned = neutralize(last_record, final.violations)
    return cleaned, verdict, max_retries
