"""Pipeline configuration.

One file (TOML or JSON) with optional sections ``paths``, ``corpus``,
``retrieval``, ``embedding``, ``extraction``, ``cohort``, ``survival`` and
``synth``. Values are resolved in the order defaults < file < environment <
command-line flags. Environment overrides use
``CHEMOUTCOME_<SECTION>__<KEY>``, e.g. ``CHEMOUTCOME_SURVIVAL__SEED=7``.
Secrets (API keys) are never read from the file; backends take them from
``CHEMOUTCOME_LLM_API_KEY`` and ``CHEMOUTCOME_EMBED_API_KEY``.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

ENV_PREFIX = "CHEMOUTCOME_"


@dataclass
class PathsConfig:
    corpus: str = "notes.jsonl"  # note corpus JSONL
    emr: str = "emr.csv"  # structured EMR table
    plans: str = "plans.csv"  # treatment plans, one row per drug
    drugs: Optional[str] = None  # approved drug list CSV; None = bundled list
    gold: Optional[str] = None  # gold extraction JSONL for scoring, if any
    output_dir: str = "out"  # every output file goes under here


@dataclass
class CorpusSection:
    chunk_size_limit: int = 2500
    chunk_overlap: int = 128
    tokenizer: str = "unicode-word"


@dataclass
class RetrievalSection:
    k: int = 10
    bm25_k1: float = 1.2
    bm25_b: float = 0.75
    fusion: str = "union"  # "union" or "rrf"


@dataclass
class EmbeddingSection:
    kind: str = "hashed"  # "hashed" (offline) or "http"
    dim: int = 512  # hashed embedder width
    endpoint: Optional[str] = None
    model: str = "mxbai-embed-large"
    timeout: float = 30.0
    max_attempts: int = 3
    max_in_flight: int = 4


@dataclass
class ExtractionSection:
    backend: str = "rule"  # "rule" or "http"
    endpoint: Optional[str] = None
    model: str = "llama3:8b"
    temperature: float = 0.0
    k_shots: int = 3
    max_retries: int = 3  # critic loop attempts
    max_attempts: int = 3  # HTTP attempts per call
    timeout: float = 120.0
    context_limit: int = 8192
    max_in_flight: int = 4


@dataclass
class CohortSection:
    support_threshold: int = 20  # min patients for a regimen column
    strict: bool = False  # raise on EMR/extraction conflicts and orphan ids


@dataclass
class SurvivalSection:
    n_trees: int = 300
    mtry: Optional[int] = None  # None = ceil(sqrt(p))
    min_leaf_size: int = 15
    seed: int = 0
    n_jobs: int = 1
    test_fraction: float = 0.2
    threshold: float = 0.5  # failure iff S(t*) < threshold
    grid_start: int = 30  # sweep grid, days
    grid_stop: int = 1095
    grid_step: int = 1
    importance_repeats: int = 5


@dataclass
class SynthSection:
    n_patients: int = 200
    seed: int = 0


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    corpus: CorpusSection = field(default_factory=CorpusSection)
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    extraction: ExtractionSection = field(default_factory=ExtractionSection)
    cohort: CohortSection = field(default_factory=CohortSection)
    survival: SurvivalSection = field(default_factory=SurvivalSection)
    synth: SynthSection = field(default_factory=SynthSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def validate(self) -> "PipelineConfig":
        s, e = self.survival, self.extraction
        checks = [
            (self.retrieval.fusion in ("union", "rrf"), "retrieval.fusion must be 'union' or 'rrf'"),
            (self.retrieval.k >= 1, "retrieval.k must be >= 1"),
            (self.embedding.kind in ("hashed", "http"), "embedding.kind must be 'hashed' or 'http'"),
            (self.embedding.kind != "http" or self.embedding.endpoint, "embedding.endpoint required for http"),
            (e.backend in ("rule", "http"), "extraction.backend must be 'rule' or 'http'"),
            (e.backend != "http" or e.endpoint, "extraction.endpoint required for the http backend"),
            (e.max_retries >= 1, "extraction.max_retries must be >= 1"),
            (e.k_shots >= 0, "extraction.k_shots must be >= 0"),
            (self.cohort.support_threshold >= 1, "cohort.support_threshold must be >= 1"),
            (s.n_trees >= 1, "survival.n_trees must be >= 1"),
            (s.min_leaf_size >= 1, "survival.min_leaf_size must be >= 1"),
            (0.0 < s.test_fraction < 1.0, "survival.test_fraction must be in (0, 1)"),
            (0.0 < s.threshold < 1.0, "survival.threshold must be in (0, 1)"),
            (0 < s.grid_start <= s.grid_stop and s.grid_step >= 1, "survival grid must satisfy 0 < start <= stop, step >= 1"),
            (self.synth.n_patients >= 1, "synth.n_patients must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def time_grid(self) -> list[float]:
        s = self.survival
        return [float(t) for t in range(s.grid_start, s.grid_stop + 1, s.grid_step)]


def _section_types() -> dict[str, type]:
    hints = typing.get_type_hints(PipelineConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(PipelineConfig)}


def _coerce(value: Any, hint, where: str):
    """Convert ``value`` (possibly a string from env/flags) to ``hint``."""
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
            return None
        hint = args[0]
    if hint is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("1", "true", "yes", "on", "0", "false", "no", "off"):
            return value.lower() in ("1", "true", "yes", "on")
        raise ConfigError(f"{where}: expected a boolean, got {value!r}")
    try:
        if hint is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if hint is float:
            return float(value)
        if hint is str:
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected {hint.__name__}, got {value!r}") from None
    return value


def _apply(cfg: PipelineConfig, section: str, key: str, value, source: str) -> None:
    sections = _section_types()
    if section not in sections:
        raise ConfigError(f"{source}: unknown config section {section!r}")
    sub = getattr(cfg, section)
    hints = typing.get_type_hints(type(sub))
    if key not in hints:
        raise ConfigError(f"{source}: unknown key {section}.{key}")
    setattr(sub, key, _coerce(value, hints[key], f"{source}: {section}.{key}"))


def read_config_file(path: str | Path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    try:
        if p.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a table/object")
    return data


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> PipelineConfig:
    """Resolve defaults < file < env < overrides (``"section.key" -> value``)."""
    cfg = PipelineConfig()
    if path is not None:
        for section, body in read_config_file(path).items():
            if not isinstance(body, dict):
                raise ConfigError(f"{path}: section {section!r} must be a table")
            for key, value in body.items():
                _apply(cfg, section, key, value, str(path))
    env = os.environ if env is None else env
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, _, key = name[len(ENV_PREFIX):].lower().partition("__")
        _apply(cfg, section, key, env[name], f"env {name}")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        _apply(cfg, section, key, value, "flag")
    return cfg.validate()
