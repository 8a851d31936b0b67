"""Exception hierarchy shared across the pipeline.

Every error carries enough context (ids, fields, paths) to be reported
without a traceback. The CLI maps the three top-level families to exit codes.
"""


class ChemoOutcomeError(Exception):
    """Base class for all package errors."""


class ConfigError(ChemoOutcomeError):
    """Invalid or unknown configuration."""


class DataError(ChemoOutcomeError):
    """Malformed or inconsistent input data."""


class BackendError(ChemoOutcomeError):
    """A remote or local model backend failed."""

    def __init__(self, message, attempts=1, retryable=True):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


# corpus
class EmptyNote(DataError):
    pass


class CorpusFormatError(DataError):
    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.errors[:10])
        super().__init__(f"{len(self.errors)} invalid corpus line(s): {lines}")


# retrieval
class DimensionMismatch(DataError):
    pass


class ZeroVector(DataError):
    pass


class EmbeddingFailure(BackendError):
    def __init__(self, message, chunk_id=None, attempts=1):
        super().__init__(message, attempts=attempts)
        self.chunk_id = chunk_id


# extraction
class PromptTooLong(ChemoOutcomeError):
    pass


class NoJsonFound(DataError):
    pass


class SchemaViolation(DataError):
    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ExtractionFailed(BackendError):
    def __init__(self, note_id, cause=None):
        super().__init__(f"extraction failed for note {note_id}: {cause}")
        self.note_id = note_id
        self.cause = cause


class AlignmentError(DataError):
    def __init__(self, message, orphans=()):
        super().__init__(message)
        self.orphans = sorted(orphans)


# cohort
class NegativeDuration(DataError):
    pass


class ConflictingValues(DataError):
    pass


class UnknownDrug(DataError):
    pass


# survival
class EmptyInput(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class InsufficientEvents(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class NoComparablePairs(DataError):
    pass


class VersionMismatch(DataError):
    pass


class SchemaHashMismatch(DataError):
    pass


# eval
class EmptyPopulation(DataError):
    pass
