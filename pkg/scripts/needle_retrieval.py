"""Plant one phenotype sentence in long filler notes and measure how often
hybrid retrieval returns the chunk holding it.

    python scripts/needle_retrieval.py --notes 100 --k 10
"""

import argparse

import numpy as np

from chemoutcome.corpus import chunk_note
from chemoutcome.embeddings import HashedBowEmbedder
from chemoutcome.retrieval import QUERIES, RetrievalConfig, retrieve_top_k
from chemoutcome.synth import needle_note


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--notes", type=int, default=100)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--fusion", choices=("union", "rrf"), default="union")
    ap.add_argument("--min-tokens", type=int, default=30000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    emb = HashedBowEmbedder()
    cfg = RetrievalConfig(k=args.k, fusion=args.fusion)
    hits, n_chunks, ranks = 0, [], []
    for i in range(args.notes):
        note, needle = needle_note(rng, i, args.min_tokens)
        chunks = chunk_note(note)
        n_chunks.append(len(chunks))
        out = retrieve_top_k(QUERIES["phenotype"], chunks, emb, cfg)
        pos = [r for r, s in enumerate(out, 1) if needle in s.chunk.text]
        if pos:
            hits += 1
            ranks.append(pos[0])
    print(f"notes={args.notes} chunks/note={np.mean(n_chunks):.1f} k={args.k} fusion={args.fusion}")
    print(f"needle retrieved in {hits}/{args.notes}; mean rank {np.mean(ranks) if ranks else float('nan'):.2f}")


if __name__ == "__main__":
    main()
