"""Command-line entry point.

Subcommands run one pipeline stage each and read/write files under
``paths.output_dir``::

    synthesize  generate a synthetic corpus, EMR table, plans and gold labels
    extract     notes -> extractions.jsonl (+ extraction_metrics.json with gold)
    featurize   extractions + EMR + plans -> features.csv, survival.jsonl, ...
    train       fit the survival forest on the training split -> model.json.gz
    evaluate    held-out metrics, sweep, calibration -> eval_report.json + figures
    report      print and write a short markdown summary

Relative input paths resolve against the config file's directory when
``--config`` is given, otherwise against the working directory.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 backend error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .errors import BackendError, ConfigError, DataError

log = logging.getLogger("chemoutcome")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3

OUT_FILES = {
    "extractions": "extractions.jsonl",
    "extraction_metrics": "extraction_metrics.json",
    "features": "features.csv",
    "survival": "survival.jsonl",
    "dictionary": "data_dictionary.json",
    "summary": "cohort_summary.json",
    "split": "split.json",
    "model": "model.json.gz",
    "report": "eval_report.json",
    "curves_svg": "survival_curves.svg",
    "curves_csv": "survival_curves.csv",
    "calibration_svg": "calibration.svg",
    "calibration_csv": "calibration.csv",
    "markdown": "report.md",
    "config": "config.resolved.json",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


class Context:
    """Resolved config plus path helpers confined to the output directory."""

    def __init__(self, cfg: PipelineConfig, base: Path):
        self.cfg = cfg
        self.base = base
        self.out = (base / cfg.paths.output_dir).resolve()

    def input(self, name: str) -> Path:
        value = getattr(self.cfg.paths, name)
        if value is None:
            raise ConfigError(f"paths.{name} is not set")
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def output(self, key: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = (self.out / OUT_FILES[key]).resolve()
        if self.out not in p.parents:
            raise ConfigError(f"refusing to write outside {self.out}: {p}")
        return p

    def existing(self, key: str) -> Path:
        p = self.out / OUT_FILES[key]
        if not p.exists():
            raise DataError(f"{p} not found; run the earlier pipeline stage first")
        return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- synthesize ---------------------------------------------------------------


def cmd_synthesize(ctx: Context, args) -> int:
    """Generate a synthetic corpus with gold labels."""
    from .synth import synthesize_cohort, write_cohort

    n = ctx.cfg.synth.n_patients
    cohort = synthesize_cohort(n, ctx.cfg.synth.seed)
    ctx.out.mkdir(parents=True, exist_ok=True)
    paths = write_cohort(cohort, ctx.out)
    # config for the following stages: inputs are the generated files
    follow = {
        "paths": {"corpus": "notes.jsonl", "emr": "emr.csv", "plans": "plans.csv", "gold": "gold.jsonl", "output_dir": "."},
        "survival": {"seed": ctx.cfg.survival.seed},
    }
    _write_json(ctx.out / "pipeline.json", follow)
    events = sum(p.event for p in cohort.patients)
    print(f"synthesized {n} patients, {len(cohort.notes)} notes, {events} failures -> {ctx.out}")
    for k, p in paths.items():
        log.info("wrote %s: %s", k, p)
    return EXIT_OK


# -- extract ------------------------------------------------------------------


def _backend(cfg: PipelineConfig):
    from .extraction.backends import HttpChatBackend, RuleBackend

    e = cfg.extraction
    if e.backend == "rule":
        return RuleBackend()
    return HttpChatBackend(
        e.endpoint, e.model, temperature=e.temperature, timeout=e.timeout,
        max_attempts=e.max_attempts, max_in_flight=e.max_in_flight, context_limit=e.context_limit,
    )


def _embedder(cfg: PipelineConfig):
    from .embeddings import HashedBowEmbedder, HttpEmbedder

    m = cfg.embedding
    if m.kind == "hashed":
        return HashedBowEmbedder(m.dim)
    return HttpEmbedder(m.endpoint, m.model, timeout=m.timeout, max_attempts=m.max_attempts, max_in_flight=m.max_in_flight)


def _load_records(path: Path):
    from .extraction.schema import OutcomeRecord, PhenotypeRecord

    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                cls = PhenotypeRecord if d["target"] == "phenotype" else OutcomeRecord
                rec = cls.from_dict(d["record"]) if d.get("record") is not None else None
            except (ValueError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            out.append((d, rec))
    return out


def cmd_extract(ctx: Context, args) -> int:
    """Extract phenotypes and outcomes from notes."""
    from .corpus import CorpusConfig, read_corpus
    from .extraction.evaluate import evaluate_extractions
    from .extraction.runner import extract_corpus
    from .retrieval import RetrievalConfig

    cfg = ctx.cfg
    notes = read_corpus(ctx.input("corpus"), lenient=args.lenient)
    try:
        corpus_cfg = CorpusConfig(**vars(cfg.corpus))
        retrieval_cfg = RetrievalConfig(**vars(cfg.retrieval))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    backend, embedder = _backend(cfg), _embedder(cfg)

    def progress(i, total):
        if i == total or i % 500 == 0:
            log.info("extracted %d/%d", i, total)

    results = extract_corpus(
        notes, backend, embedder, k_shots=cfg.extraction.k_shots, corpus_cfg=corpus_cfg,
        retrieval_cfg=retrieval_cfg, max_retries=cfg.extraction.max_retries, workers=args.workers, progress=progress,
    )
    with open(ctx.output("extractions"), "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")

    failed = [r for r in results if r.error]
    ok = [r for r in results if not r.error]
    grounded = sum(r.verdict.grounded for r in ok)
    retried = sum(r.attempts > 1 for r in ok)
    print(f"{len(results)} extractions from {len(notes)} notes: {grounded} grounded, {retried} retried, {len(failed)} failed")

    if cfg.paths.gold:
        gold = [(d["note_id"], d["target"], rec) for d, rec in _load_records(ctx.input("gold"))]
        pred = [(r.note_id, r.target, r.record) for r in ok]
        keys = {(r.note_id, r.target) for r in ok}
        metrics = evaluate_extractions(pred, [g for g in gold if (g[0], g[1]) in keys])
        _write_json(ctx.output("extraction_metrics"), metrics)
        micro = metrics.get("micro", {})
        print(f"vs gold: precision {micro.get('precision')}, recall {micro.get('recall')}")

    if failed:
        backend_fail = any(r.error.startswith("ExtractionFailed") for r in failed)
        for r in failed[:10]:
            print(f"  {r.note_id}/{r.target}: {r.error}", file=sys.stderr)
        return EXIT_BACKEND if backend_fail else EXIT_DATA
    return EXIT_OK


# -- featurize ----------------------------------------------------------------


def cmd_featurize(ctx: Context, args) -> int:
    """Build the feature matrix and survival records."""
    from .cohort import Extraction, build_dataset, data_dictionary, load_approved_drugs
    from .cohort.io import read_emr_csv, read_plans_csv, write_feature_csv, write_survival_jsonl

    cfg = ctx.cfg
    rows = _load_records(ctx.existing("extractions"))
    extractions = []
    for d, rec in rows:
        if rec is None:
            log.warning("skipping failed extraction %s/%s", d["note_id"], d["target"])
            continue
        extractions.append(Extraction(d["patient_id"], d["note_id"], dt.date.fromisoformat(d["note_date"]), d["target"], rec))
    emr = read_emr_csv(ctx.input("emr"))
    plans = read_plans_csv(ctx.input("plans"))
    try:
        approved = load_approved_drugs(ctx.input("drugs") if cfg.paths.drugs else None)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    ds = build_dataset(extractions, emr, plans, approved, cfg.cohort.support_threshold, cfg.cohort.strict)

    write_feature_csv(ds.features, ds.columns, ctx.output("features"))
    write_survival_jsonl(ds.records, ctx.output("survival"))
    _write_json(ctx.output("dictionary"), data_dictionary(ds.columns))
    summary = ds.summary()
    _write_json(ctx.output("summary"), summary)
    print(f"cohort n={summary['n']}, failure prevalence {summary['failure_prevalence']:.3f}, "
          f"{summary['combinations_retained']}/{summary['combinations_observed']} regimens retained "
          f"(support >= {summary['support_threshold']}), {len(ds.columns)} features")
    return EXIT_OK


# -- train / evaluate ---------------------------------------------------------


def _load_dataset(ctx: Context):
    from .cohort.io import read_feature_csv, read_survival_jsonl

    ids, columns, rows = read_feature_csv(ctx.existing("features"))
    recs = {r.patient_id: r for r in read_survival_jsonl(ctx.existing("survival"))}
    missing = [i for i in ids if i not in recs]
    if missing:
        from .errors import AlignmentError

        raise AlignmentError("feature rows without survival records", orphans=missing)
    X = np.asarray(rows, dtype=float)
    time = np.array([recs[i].time_days for i in ids], dtype=float)
    event = np.array([recs[i].event for i in ids], dtype=bool)
    return ids, columns, X, time, event


def holdout_split(ids, test_fraction: float, seed: int) -> tuple[list[str], list[str]]:
    """Seeded random split of patient ids into (train, test)."""
    order = sorted(ids)
    perm = np.random.default_rng(seed).permutation(len(order))
    n_test = max(1, int(round(test_fraction * len(order))))
    test = sorted(order[i] for i in perm[:n_test])
    train = sorted(order[i] for i in perm[n_test:])
    return train, test


def cmd_train(ctx: Context, args) -> int:
    """Fit the random survival forest."""
    from .survival.forest import ForestParams, fit_forest, serialize_model

    s = ctx.cfg.survival
    ids, columns, X, time, event = _load_dataset(ctx)
    train, test = holdout_split(ids, s.test_fraction, s.seed)
    pos = {pid: i for i, pid in enumerate(ids)}
    tr = [pos[i] for i in train]
    params = ForestParams(s.n_trees, s.mtry, s.min_leaf_size, s.seed, args.workers if args.workers > 1 else s.n_jobs)
    model = fit_forest(X[tr], time[tr], event[tr], params, columns)
    ctx.output("model").write_bytes(serialize_model(model))
    _write_json(ctx.output("split"), {"seed": s.seed, "test_fraction": s.test_fraction, "train": train, "test": test})
    print(f"trained {s.n_trees} trees on {len(train)} patients ({int(event[tr].sum())} events); {len(test)} held out")
    return EXIT_OK


def cmd_evaluate(ctx: Context, args) -> int:
    """Evaluate the model on the held-out split."""
    from .plots import plot_calibration, plot_survival_curves
    from .survival.evaluation import evaluate_model, labels_at
    from .survival.forest import deserialize_model

    s = ctx.cfg.survival
    ids, columns, X, time, event = _load_dataset(ctx)
    model = deserialize_model(ctx.existing("model").read_bytes(), expected_features=columns)
    split = json.loads(ctx.existing("split").read_text(encoding="utf-8"))
    pos = {pid: i for i, pid in enumerate(ids)}
    try:
        te = [pos[i] for i in split["test"]]
    except KeyError as exc:
        raise DataError(f"split lists unknown patient {exc}") from None
    protocol = {
        "seed": s.seed,
        "split": f"holdout {1 - split['test_fraction']:.0%}/{split['test_fraction']:.0%}",
        "test_fraction": split["test_fraction"],
        "n_train": len(split["train"]),
        "n_test": len(te),
        "n_trees": model.params.n_trees,
        "min_leaf_size": model.params.min_leaf_size,
        "mtry": model.params.resolved_mtry(len(columns)),
        "threshold": s.threshold,
        "grid": [s.grid_start, s.grid_stop, s.grid_step],
    }
    Xt, tt, et = X[te], time[te], event[te]
    report = evaluate_model(model, Xt, tt, et, ctx.cfg.time_grid(), s.threshold, s.importance_repeats, s.seed, protocol)
    ctx.output("report").write_text(report.to_json() + "\n", encoding="utf-8")

    S = model.predict_survival_matrix(Xt)
    y, known = labels_at(tt, et, report.time_point_days)
    curves = {"all": S.mean(axis=0)}
    if (known & (y == 1)).any():
        curves["failure by t*"] = S[known & (y == 1)].mean(axis=0)
    if (known & (y == 0)).any():
        curves["no failure by t*"] = S[known & (y == 0)].mean(axis=0)
    plot_survival_curves(model.time_grid, curves, report.time_point_days, ctx.output("curves_svg"), ctx.output("curves_csv"))
    plot_calibration(report.calibration_bins, ctx.output("calibration_svg"), ctx.output("calibration_csv"))
    print(f"held-out C-index {report.c_index:.3f}; t* = {report.time_point_days:g} days; "
          f"accuracy {_fmt(report.accuracy)}, F1+ {_fmt(report.f1_pos)}, F1- {_fmt(report.f1_neg)}")
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.3f}"


# -- report -------------------------------------------------------------------


def cmd_report(ctx: Context, args) -> int:
    """Summarize outputs as markdown."""
    report = json.loads(ctx.existing("report").read_text(encoding="utf-8"))
    lines = ["# Pipeline report", ""]
    summary_path = ctx.out / OUT_FILES["summary"]
    if summary_path.exists():
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        lines += [
            "## Cohort",
            "",
            f"- patients: {summary['n']}",
            f"- failure prevalence: {summary['failure_prevalence']:.3f}",
            f"- regimens retained: {summary.get('combinations_retained')} of {summary.get('combinations_observed')}",
            "",
            "| column | n | failure % |",
            "|---|---|---|",
        ]
        lines += [f"| {k} | {v['n']} | {v['failure_pct']:.1f} |" for k, v in summary["regimens"].items()]
        lines.append("")
    metrics_path = ctx.out / OUT_FILES["extraction_metrics"]
    if metrics_path.exists():
        m = json.loads(metrics_path.read_text(encoding="utf-8"))
        micro = m.get("micro", {})
        lines += ["## Extraction vs gold", "", f"- micro precision: {micro.get('precision')}",
                  f"- micro recall: {micro.get('recall')}", ""]
    lines += [
        "## Survival model (held-out)",
        "",
        f"- protocol: {report['protocol'].get('split')}, seed {report['protocol'].get('seed')}",
        f"- C-index: {report['c_index']:.4f}",
        f"- t*: {report['time_point_days']:g} days",
        f"- accuracy: {_fmt(report['accuracy'])}",
        f"- F1 failure / non-failure / macro: {_fmt(report['f1_pos'])} / {_fmt(report['f1_neg'])} / {_fmt(report['f1_macro'])}",
        "",
        "Top features by permutation importance:",
        "",
    ]
    lines += [f"{i + 1}. {f['feature']} ({f['importance']:.4f})" for i, f in enumerate(report["feature_importances"][:10])]
    text = "\n".join(lines) + "\n"
    ctx.output("markdown").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


COMMANDS = {
    "synthesize": cmd_synthesize,
    "extract": cmd_extract,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--out", help="output directory (paths.output_dir)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
    common.add_argument("--seed", type=int, help="seed for synthesis and the survival model")
    common.add_argument("--workers", type=int, default=1, help="worker threads/processes")
    common.add_argument("--lenient", action="store_true", help="skip malformed corpus lines instead of failing")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="chemoutcome", description="Chemotherapy outcome extraction and survival modelling.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=fn.__doc__.rstrip("."))
        if name == "synthesize":
            p.add_argument("--n", type=int, help="number of patients (synth.n_patients)")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    if args.out:
        out["paths.output_dir"] = args.out
    if args.seed is not None:
        out["synth.seed"] = args.seed
        out["survival.seed"] = args.seed
    if getattr(args, "n", None) is not None:
        out["synth.n_patients"] = args.n
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = load_config(args.config, overrides=_overrides(args))
        base = Path(args.config).resolve().parent if args.config else Path.cwd()
        ctx = Context(cfg, base)
        code = COMMANDS[args.command](ctx, args)
        if args.command != "synthesize":
            _write_json(ctx.output("config"), cfg.to_dict())
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        orphans = getattr(exc, "orphans", None)
        if orphans:
            print(f"  orphan ids: {', '.join(map(str, orphans[:20]))}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
