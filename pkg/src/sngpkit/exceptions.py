"""Error types raised across the package.

``NotFittedError`` is re-exported from scikit-learn so estimator users
catch the exception class they already know.
"""

from __future__ import annotations

from sklearn.exceptions import NotFittedError

__all__ = [
    "NotFittedError",
    "CsvFormatError",
    "ConfigError",
    "CheckpointError",
    "TrainingError",
    "NumericalError",
    "PosteriorStateError",
]


class CsvFormatError(ValueError):
    """Malformed dataset CSV. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


class CheckpointError(ValueError):
    """Checkpoint file rejected (bad magic, version, or structure)."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or gradient)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (e.g. posterior precision not positive definite)."""


class PosteriorStateError(RuntimeError):
    """Laplace posterior used in the wrong lifecycle state."""
