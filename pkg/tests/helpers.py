"""Small builders shared by unit tests."""

from chemoutcome.corpus import Chunk
from chemoutcome.retrieval import ScoredChunk


def scored(*texts, note_id="N1"):
    return [ScoredChunk(Chunk(note_id, i, t, len(t.split())), 1.0, 0.5, "both") for i, t in enumerate(texts)]


def outcome_dict(progressed=False, discontinued=False, adverse=False, qol=False, modified=False,
                 died=False, hospice=False, event_date=None, details=("", "", "")):
    return {
        "progression": {"progressed": progressed, "discontinued": discontinued, "details": details[0]},
        "toxicity": {
            "adverse_effects": adverse,
            "qol_deterioration": qol,
            "discontinued_or_modified": modified,
            "details": details[1],
        },
        "death_hospice": {"died": died, "hospice": hospice, "event_date": event_date, "details": details[2]},
    }


def phenotype_dict(**over):
    d = {
        "t_stage": None, "n_stage": None, "m_stage": None, "stage_group": None,
        "tumor_size_cm": None, "grade": None, "ecog": None, "karnofsky": None,
        "er": "unknown", "pr": "unknown", "her2": "unknown",
    }
    d.update(over)
    return d
