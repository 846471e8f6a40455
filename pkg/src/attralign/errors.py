"""Exception types shared across the package."""

from __future__ import annotations


class AttralignError(Exception):
    """Base class for all package errors."""


class SchemaError(AttralignError):
    """Feature schema is malformed or violates its invariants."""


class EmptyTableError(AttralignError):
    """Input table has a header but no data rows."""


class RaggedRowsError(AttralignError):
    """A CSV row has a different number of fields than the header."""


class DegenerateDatasetError(AttralignError):
    """Cleaning removed every column."""


class UnknownLevelError(AttralignError):
    """A categorical value has no declared level and no consolidation rule."""


class TargetError(AttralignError):
    """Target column missing, non-binary, or carries undeclared labels."""


class SplitError(AttralignError):
    """Stratified split preconditions violated (e.g. a class with < 2 rows)."""


class ConvergenceError(AttralignError):
    """Optimizer did not reach the gradient-norm stop within its budget."""

    def __init__(self, message: str, gradient_norm: float):
        super().__init__(message)
        self.gradient_norm = gradient_norm


class InvalidForestError(AttralignError):
    """Forest violates structural invariants (e.g. non-positive cover)."""


class DimensionError(AttralignError):
    """Input row or matrix width does not match the model."""


class UnparseableReplyError(AttralignError):
    """No valid ranking line could be extracted from an LLM reply."""


class PromptError(AttralignError):
    """Prompt construction preconditions violated."""


class CassetteMissError(AttralignError):
    """Replay-mode request whose fingerprint is not in the cassette."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no cassette entry for fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class TransportError(AttralignError):
    """HTTP-level failure from a provider."""

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class RetriesExhaustedError(AttralignError):
    """Retry budget spent; carries the final underlying error."""

    def __init__(self, last_error: Exception, attempts: int):
        super().__init__(f"gave up after {attempts} attempts: {last_error}")
        self.last_error = last_error
        self.attempts = attempts


class UndersizedCellError(AttralignError):
    """A confusion cell has fewer members than the per-cell sample size."""

    def __init__(self, cell: str, available: int, requested: int):
        super().__init__(
            f"cell {cell} has {available} members, need {requested}"
        )
        self.cell = cell
        self.available = available
        self.requested = requested


class PlanError(AttralignError):
    """Evaluation plan file is invalid."""
