"""Run every CLI stage on a fresh synthetic cohort.

    python scripts/run_pipeline.py --out runs/demo --n 300 --seed 0

Extra ``--set SECTION.KEY=VALUE`` options are passed to every stage after
synthesis, e.g. ``--set survival.n_trees=100``.
"""

import argparse
import sys
from pathlib import Path

from chemoutcome.cli import main as cli

STAGES = ("extract", "featurize", "train", "evaluate", "report")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/demo")
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = ap.parse_args()

    out = Path(args.out)
    code = cli(["synthesize", "--out", str(out), "--n", str(args.n), "--seed", str(args.seed)])
    if code:
        return code
    common = ["--config", str(out / "pipeline.json"), "--workers", str(args.workers)]
    for s in args.set:
        common += ["--set", s]
    for stage in STAGES:
        print(f"== {stage}")
        code = cli([stage, *common])
        if code:
            print(f"{stage} failed with exit code {code}", file=sys.stderr)
            return code
    print(f"report: {out / 'report.md'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
