"""Regex rule tables for phenotypes and outcome labels.

The same tables serve two roles. The rule backend extracts values with them
(negation-aware for outcome flags), and the critic uses them as lexicons to
decide whether a value is supported by text. Because the critic's test is a
superset of what the extractor requires, rule output always grounds.
"""

from __future__ import annotations

import datetime as dt
import re
from typing import Iterable

from .schema import OutcomeRecord, PhenotypeRecord

_I = re.IGNORECASE

_TOX_WORDS = (
    r"toxicit|neutropen|neuropath|nause|vomit|diarrh|fatigue|mucositis|rash|anemi|"
    r"thrombocytopen|adverse|reaction|event"
)

PHENOTYPE_PATTERNS: dict[str, list[re.Pattern]] = {
    "t_stage": [re.compile(r"(?<![A-Za-z0-9])[cpy]?T(is|[0-4]|X)(?![0-9a-z])")],
    "n_stage": [re.compile(r"(?:(?<![A-Za-z0-9])[cpy]?|(?<=[0-4Xs]))N([0-3]|X)(?![0-9a-z])")],
    "m_stage": [re.compile(r"(?:(?<![A-Za-z0-9])[cpy]?|(?<=[0-3X]))M([01]|X)(?![0-9a-z])")],
    "stage_group": [re.compile(r"\b[Ss]tage\s+(IV|III[ABC]?|II[AB]?|I[AB]?|0)(?![A-Za-z0-9])")],
    "tumor_size_cm": [
        re.compile(r"\b(?:tumou?r|mass|lesion)\b[^.\n]{0,40}?(\d+(?:\.\d+)?)\s*(cm|mm)\b", _I)
    ],
    "grade": [
        re.compile(r"\bgrade\s*:?\s*([1-4]|X)\b(?!\s*(?:" + _TOX_WORDS + "))", _I),
        re.compile(r"(?<![A-Za-z0-9])G([1-4]|X)(?![0-9A-Za-z])"),
    ],
    "ecog": [
        re.compile(
            r"\bECOG(?:\s+performance\s+status)?(?:\s+(?:score|PS))?\s*(?:of|:|=|is)?\s*([0-5])\b", _I
        )
    ],
    "karnofsky": [
        re.compile(
            r"\b(?:Karnofsky(?:\s+performance\s+status)?|KPS)(?:\s+score)?\s*(?:of|:|=|is)?\s*(100|[1-9]0|0)\b", _I
        )
    ],
    "er": [re.compile(r"\b(?:ER|estrogen\s+receptor)(?:\s+status)?\s*(?:is|:|-)?\s*(positive|negative|\+|-)", _I)],
    "pr": [
        re.compile(r"\b(?:PR|progesterone\s+receptor)(?:\s+status)?\s*(?:is|:|-)?\s*(positive|negative|\+|-)", _I)
    ],
    "her2": [
        re.compile(r"\bHER-?2(?:/neu)?(?:\s+status)?\s*(?:is|:|-)?\s*(positive|negative|\+|-)", _I)
    ],
}

OUTCOME_LEXICON: dict[str, re.Pattern] = {
    "progression.progressed": re.compile(
        r"\b(?:disease\s+progression|progression|progressive\s+disease|progressed|progressing|"
        r"new\s+metasta\w*|worsening\s+disease)\b",
        _I,
    ),
    "progression.discontinued": re.compile(r"\b(?:discontinu\w*|stopped|terminated|ceased|halted)\b", _I),
    "toxicity.adverse_effects": re.compile(
        r"\b(?:toxicit\w*|adverse\s+(?:effect|event|reaction)s?|side\s+effects?|neutropeni\w*|"
        r"neuropath\w*|nausea|vomiting|mucositis|diarrh\w*|fatigue|febrile|rash|cardiotoxicit\w*)\b",
        _I,
    ),
    "toxicity.qol_deterioration": re.compile(
        r"\b(?:quality\s+of\s+life|QoL|functional\s+decline|declin\w*\s+in\s+(?:function|performance))\b", _I
    ),
    "toxicity.discontinued_or_modified": re.compile(
        r"\b(?:discontinu\w*|stopped|held|dose[-\s]+(?:reduc\w*|modif\w*|delay\w*)|reduced\s+dose|"
        r"modified|switched)\b",
        _I,
    ),
    "death_hospice.died": re.compile(r"\b(?:died|expired|passed\s+away|deceased|death)\b", _I),
    "death_hospice.hospice": re.compile(r"\bhospice\b", _I),
}

# a flag's anchor decides which sentences the co-occurring flag is read from
_SENTENCE_ANCHOR = {
    "progression.discontinued": "progression.progressed",
    "toxicity.discontinued_or_modified": "toxicity.adverse_effects",
    "toxicity.qol_deterioration": None,
}

NEGATION = re.compile(
    r"\b(?:no|not|without|denies|denied|negative\s+for|free\s+of|absence\s+of|declined|declines|never)\b", _I
)
_NEG_WINDOW = 40

ISO_DATE = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
US_DATE = re.compile(r"\b(\d{1,2})/(\d{1,2})/(\d{4})\b")
_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+|\n+")


def sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENT_SPLIT.split(text) if s.strip()]


def _normalize(field: str, m: re.Match):
    g = m.group(1)
    if field == "t_stage":
        return "Tis" if g.lower() == "is" else "T" + g
    if field == "n_stage":
        return "N" + g
    if field == "m_stage":
        return "M" + g
    if field == "stage_group":
        return g
    if field == "tumor_size_cm":
        v = float(g)
        return round(v / 10.0, 4) if m.group(2).lower() == "mm" else v
    if field == "grade":
        return "G" + g.upper()
    if field in ("ecog", "karnofsky"):
        return int(g)
    if field in ("er", "pr", "her2"):
        return "positive" if g.lower() in ("positive", "+") else "negative"
    raise KeyError(field)


def phenotype_mentions(field: str, texts: Iterable[str]) -> list:
    """All values of ``field`` stated in ``texts``, in order of appearance."""
    found = []
    for text in texts:
        hits = []
        for pat in PHENOTYPE_PATTERNS[field]:
            hits.extend((m.start(), _normalize(field, m)) for m in pat.finditer(text))
        found.extend(v for _, v in sorted(hits, key=lambda h: h[0]))
    if field == "tumor_size_cm":
        found = [v for v in found if v < 50]
    return found


def lexicon_hits(flag: str, texts: Iterable[str]) -> int:
    """Number of sentences with an un-negated mention of ``flag``."""
    pat = OUTCOME_LEXICON[flag]
    return sum(_affirmed(pat, s) for t in texts for s in sentences(t))


def _affirmed(pat: re.Pattern, sentence: str) -> bool:
    for m in pat.finditer(sentence):
        before = sentence[max(0, m.start() - _NEG_WINDOW) : m.start()]
        before = re.split(r"[,;:]", before)[-1]
        if not NEGATION.search(before):
            return True
    return False


def find_dates(text: str) -> list[str]:
    out = []
    for m in ISO_DATE.finditer(text):
        try:
            out.append(dt.date(int(m[1]), int(m[2]), int(m[3])).isoformat())
        except ValueError:
            pass
    for m in US_DATE.finditer(text):
        try:
            out.append(dt.date(int(m[3]), int(m[1]), int(m[2])).isoformat())
        except ValueError:
            pass
    return out


def extract_phenotype(texts: list[str]) -> PhenotypeRecord:
    rec = PhenotypeRecord()
    for field in PHENOTYPE_PATTERNS:
        values = phenotype_mentions(field, texts)
        if values:
            setattr(rec, field, values[0])
    return rec


def extract_outcome(texts: list[str]) -> OutcomeRecord:
    rec = OutcomeRecord()
    sents = [s for t in texts for s in sentences(t)]
    support: dict[str, list[str]] = {}
    for flag, pat in OUTCOME_LEXICON.items():
        anchor = _SENTENCE_ANCHOR.get(flag)
        hits = []
        for s in sents:
            if not _affirmed(pat, s):
                continue
            if anchor and not _affirmed(OUTCOME_LEXICON[anchor], s):
                continue
            hits.append(s)
        support[flag] = hits

    def details(*flags):
        seen = []
        for f in flags:
            for s in support[f]:
                if s not in seen:
                    seen.append(s)
        return " ".join(seen[:3])

    p, t, d = rec.progression, rec.toxicity, rec.death_hospice
    p.progressed = bool(support["progression.progressed"])
    p.discontinued = bool(support["progression.discontinued"])
    p.details = details("progression.progressed", "progression.discontinued") if p.progressed else ""
    t.adverse_effects = bool(support["toxicity.adverse_effects"])
    t.qol_deterioration = bool(support["toxicity.qol_deterioration"])
    t.discontinued_or_modified = bool(support["toxicity.discontinued_or_modified"])
    if t.adverse_effects or t.qol_deterioration:
        t.details = details("toxicity.adverse_effects", "toxicity.qol_deterioration", "toxicity.discontinued_or_modified")
    d.died = bool(support["death_hospice.died"])
    d.hospice = bool(support["death_hospice.hospice"])
    if d.died or d.hospice:
        d.details = details("death_hospice.died", "death_hospice.hospice")
        dates = [x for s in support["death_hospice.died"] + support["death_hospice.hospice"] for x in find_dates(s)]
        d.event_date = dates[0] if dates else None
    return rec
