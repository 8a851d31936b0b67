"""Retrieval-augmented, schema-constrained, critic-validated extraction."""

from .backends import HttpChatBackend, MockBackend, RuleBackend, ScriptedBackend, prompt_hash
from .critic import CriticVerdict, Violation, extract_with_critic, ground_check, neutralize
from .evaluate import evaluate_extractions, record_labels
from .prompt import BuiltPrompt, ExtractionRequest, Shot, build_prompt, load_shots
from .schema import (
    TARGET_SCHEMA,
    DeathHospice,
    OutcomeRecord,
    PhenotypeRecord,
    Progression,
    Toxicity,
    parse_and_validate,
    validate_dict,
)
