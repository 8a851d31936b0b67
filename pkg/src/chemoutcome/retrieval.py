"""Hybrid lexical/semantic chunk retrieval.

Lexical scores use Okapi BM25 with the +1-smoothed IDF, so scores are never
negative even on a three-chunk corpus. Corpus statistics are computed over
the chunks of a single note.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Chunk, tokenize
from .embeddings import EmbeddingProvider
from .errors import DimensionMismatch, EmbeddingFailure, ZeroVector

RRF_K = 60

# Fixed query templates per extraction target.
QUERIES = {
    "phenotype": (
        "tumor stage TNM T N M stage group tumor size cm grade ECOG Karnofsky "
        "performance status estrogen receptor ER progesterone receptor PR HER2 biomarker"
    ),
    "outcome": (
        "disease progression progressed discontinued stopped toxicity adverse effects "
        "dose reduced held quality of life died death expired hospice"
    ),
}


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 10
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    fusion: str = "union"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.bm25_k1 <= 0:
            raise ValueError("bm25_k1 must be > 0")
        if not 0 <= self.bm25_b <= 1:
            raise ValueError("bm25_b must lie in [0, 1]")
        if self.fusion not in ("union", "rrf"):
            raise ValueError(f"unknown fusion {self.fusion!r}")


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    bm25_score: float
    cosine_score: float
    source: str
    fusion_score: float = 0.0


def _terms(text: str) -> list[str]:
    return [t.lower() for t in tokenize(text)]


class CorpusStats:
    """Document frequencies and lengths for BM25 over one chunk set."""

    def __init__(self, chunks: Sequence[Chunk]):
        self.term_freqs = [Counter(_terms(c.text)) for c in chunks]
        self.doc_lens = [sum(tf.values()) for tf in self.term_freqs]
        self.n_docs = len(chunks)
        self.avgdl = (sum(self.doc_lens) / self.n_docs) if self.n_docs else 0.0
        self.df: Counter = Counter()
        for tf in self.term_freqs:
            self.df.update(tf.keys())

    def idf(self, term: str) -> float:
        n_t = self.df.get(term, 0)
        return math.log((self.n_docs - n_t + 0.5) / (n_t + 0.5) + 1.0)


def bm25_score(
    query: Sequence[str],
    chunk: Chunk | Counter,
    stats: CorpusStats,
    cfg: RetrievalConfig = RetrievalConfig(),
) -> float:
    tf = chunk if isinstance(chunk, Counter) else Counter(_terms(chunk.text))
    dl = sum(tf.values())
    norm = cfg.bm25_k1 * (1 - cfg.bm25_b + cfg.bm25_b * dl / stats.avgdl) if stats.avgdl else cfg.bm25_k1
    score = 0.0
    for term in query:
        f = tf.get(term.lower(), 0)
        if f:
            score += stats.idf(term.lower()) * f * (cfg.bm25_k1 + 1) / (f + norm)
    return score


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dims differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _top(scores: list[float], k: int) -> list[int]:
    # stable: ties keep chunk order
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]


def retrieve_top_k(
    query: str,
    chunks: Sequence[Chunk],
    embedder: EmbeddingProvider,
    cfg: RetrievalConfig = RetrievalConfig(),
) -> list[ScoredChunk]:
    """Return the fused lexical and semantic top-k chunks, best first."""
    if not chunks:
        raise ValueError("retrieve_top_k needs at least one chunk")
    stats = CorpusStats(chunks)
    q_terms = _terms(query)
    lexical = [bm25_score(q_terms, tf, stats, cfg) for tf in stats.term_freqs]

    q_vec = embedder.embed(query)
    semantic = []
    for c in chunks:
        try:
            vec = embedder.embed(c.text)
        except EmbeddingFailure as exc:
            exc.chunk_id = c.chunk_id
            raise
        semantic.append(cosine_similarity(q_vec, vec))

    lex_rank = _top(lexical, len(chunks))
    sem_rank = _top(semantic, len(chunks))
    rrf = [0.0] * len(chunks)
    for ranking in (lex_rank, sem_rank):
        for r, i in enumerate(ranking):
            rrf[i] += 1.0 / (RRF_K + r + 1)

    k = cfg.k
    lex_top, sem_top = set(lex_rank[:k]), set(sem_rank[:k])
    if cfg.fusion == "union":
        selected = lex_top | sem_top
    else:
        selected = set(_top(rrf, k))

    out = []
    for i in _top(rrf, len(chunks)):
        if i not in selected:
            continue
        src = "both" if i in lex_top and i in sem_top else ("lexical" if i in lex_top else "semantic")
        out.append(ScoredChunk(chunks[i], lexical[i], semantic[i], src, rrf[i]))
    return out
