"""
Exception hierarchy shared by every layer of the package.
"""
from typing import Any, Dict, List, Optional


class DialoopError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class WorldError(DialoopError):
    """Unknown domain or slot, or an invalid world file."""
    pass


class CorpusFormatError(DialoopError):
    """Malformed corpus line."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}", {"line_number": line_number})
        self.line_number = line_number


class ContextOverflowError(DialoopError):
    """Token sequence longer than the model context."""

    def __init__(self, length: int, context_length: int):
        super().__init__(
            f"sequence of {length} tokens exceeds context length {context_length}",
            {"length": length, "context_length": context_length},
        )
        self.length = length
        self.context_length = context_length


class NaNLossError(DialoopError):
    """Non-finite loss or gradient during an update."""
    pass


class TrainingDivergedError(DialoopError):
    """RL success collapsed relative to the supervised baseline."""
    pass


class StageFailure(DialoopError):
    """A pipeline stage failed; carries the stage name and its artifacts."""

    def __init__(self, stage: str, message: str, artifacts: Optional[List[str]] = None):
        super().__init__(f"stage '{stage}' failed: {message}", {"stage": stage, "artifacts": artifacts or []})
        self.stage = stage
        self.artifacts = artifacts or []


class EvaluationError(DialoopError):
    """Invalid evaluation input (length mismatch, too few pairs)."""
    pass
