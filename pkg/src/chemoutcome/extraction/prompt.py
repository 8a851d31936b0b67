"""K-shot prompt assembly."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from ..corpus import count_tokens
from ..errors import PromptTooLong
from ..retrieval import ScoredChunk
from .schema import SCHEMAS, TARGET_SCHEMA, schema_text

log = logging.getLogger(__name__)

INSTRUCTIONS = {
    "phenotype": (
        "Extract breast cancer phenotypes (TNM staging, stage group, tumor size, grade, "
        "ECOG and Karnofsky performance scores, ER/PR/HER2 status) from the oncology note "
        "chunks below. Use null, or \"unknown\" for biomarkers, when a value is not explicitly stated."
    ),
    "outcome": (
        "Extract chemotherapy outcome labels (progression, toxicity, death or hospice) from the "
        "oncology note chunks below. Mark a flag true only when the note explicitly states it; "
        "copy supporting sentences into the details fields."
    ),
}
OUTPUT_DIRECTIVE = "Emit only a single JSON object that conforms to the schema. Do not add any prose."


@dataclass(frozen=True)
class Shot:
    excerpt: str
    gold: dict


@dataclass
class ExtractionRequest:
    target: str
    chunks: Sequence[ScoredChunk]
    shots: Sequence[Shot] = ()
    schema_id: str = ""
    note_id: str = ""
    patient_id: str = ""
    k_shots: int | None = None

    def __post_init__(self):
        if self.target not in TARGET_SCHEMA:
            raise ValueError(f"unknown target {self.target!r}")
        if not self.schema_id:
            self.schema_id = TARGET_SCHEMA[self.target]
        if self.schema_id not in SCHEMAS:
            raise ValueError(f"schema_id {self.schema_id!r} is not registered")
        if self.k_shots is not None and len(self.shots) != self.k_shots:
            raise ValueError(f"expected {self.k_shots} shots, got {len(self.shots)}")


@dataclass
class BuiltPrompt:
    text: str
    included: list[str]
    dropped: list[str] = field(default_factory=list)
    n_tokens: int = 0


def load_shots(target: str, k: int = 3) -> list[Shot]:
    """Bundled exemplars for ``target``; raises if fewer than ``k`` ship."""
    raw = resources.files("chemoutcome.data").joinpath(f"shots_{target}.json").read_text("utf-8")
    shots = [Shot(s["excerpt"], s["gold"]) for s in json.loads(raw)]
    if k > len(shots):
        raise ValueError(f"only {len(shots)} {target} exemplars bundled, asked for {k}")
    return shots[:k]


def _render(req: ExtractionRequest, chunks: Sequence[ScoredChunk], correction: str | None) -> str:
    parts = [
        "### Task",
        INSTRUCTIONS[req.target],
        "### JSON schema",
        f"schema_id: {req.schema_id}",
        schema_text(req.schema_id),
    ]
    if req.shots:
        parts.append("### Examples")
        for i, shot in enumerate(req.shots, start=1):
            parts.append(f"<<EXAMPLE {i}>>\nNote: {shot.excerpt}\nJSON: {json.dumps(shot.gold)}\n<<END EXAMPLE>>")
    parts.append("### Note chunks")
    for rank, sc in enumerate(chunks, start=1):
        parts.append(f"<<CHUNK id={sc.chunk.chunk_id} rank={rank}>>\n{sc.chunk.text.strip()}\n<<END CHUNK>>")
    if correction:
        parts.append("### Correction")
        parts.append(correction)
    parts.append("### Output")
    parts.append(OUTPUT_DIRECTIVE)
    return "\n".join(parts) + "\n"


def build_prompt(
    req: ExtractionRequest,
    context_limit: int | None = None,
    correction: str | None = None,
    tokenizer: str = "unicode-word",
) -> BuiltPrompt:
    """Render the prompt; drop lowest-ranked chunks until it fits ``context_limit``.

    Exemplars are never dropped. ``PromptTooLong`` is raised when not even
    the top-ranked chunk fits.
    """
    if not req.chunks:
        raise ValueError("build_prompt needs at least one chunk")
    chunks = list(req.chunks)
    dropped: list[str] = []
    while True:
        text = _render(req, chunks, correction)
        n = count_tokens(text, tokenizer)
        if context_limit is None or n <= context_limit:
            break
        if len(chunks) == 1:
            raise PromptTooLong(f"prompt needs {n} tokens even with one chunk (limit {context_limit})")
        dropped.append(chunks.pop().chunk.chunk_id)
    if dropped:
        log.info("note %s: dropped %d chunk(s) to fit context: %s", req.note_id, len(dropped), dropped)
    return BuiltPrompt(text, [c.chunk.chunk_id for c in chunks], dropped, n)
