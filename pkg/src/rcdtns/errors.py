"""Exception types shared across the package.

The CLI and HTTP service map these onto exit codes / status codes:
user-input problems (`InvalidInput`, `ConfigMismatch`, `FormatError`,
`InsufficientData`, `ModelIncomplete`) are client errors, while
`GenerationFailed` is a runtime failure.
"""


class RcdtError(Exception):
    """Base class for all package errors."""


class InvalidInput(RcdtError):
    """An argument violates a documented precondition."""


class ConfigMismatch(RcdtError):
    """Transform fingerprints of the operands disagree."""


class InsufficientData(RcdtError):
    """Not enough samples to fit a model component."""

    def __init__(self, message, class_label=None):
        super().__init__(message)
        self.class_label = class_label


class ModelIncomplete(RcdtError):
    """A trained model is missing a required per-class component."""


class FormatError(RcdtError):
    """A dataset or model file is malformed."""


class SampleRejected(RcdtError):
    """A synthetic draw lost too much mass outside the frame (internal, retried)."""


class GenerationFailed(RcdtError):
    """Synthetic generation exhausted its redraw budget."""
