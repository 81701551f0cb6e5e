"""Exception types shared across the toolkit."""


class LayoutQAError(Exception):
    """Base class for every error raised by this package."""


class ParseError(LayoutQAError):
    """OCR input bytes could not be parsed."""


class RecordError(LayoutQAError):
    """A QA record is malformed or inconsistent."""


class EmptyDocument(LayoutQAError):
    """An operation needed at least one text segment."""


class PromptError(LayoutQAError):
    """A prompt could not be filled."""


class ConfigError(LayoutQAError):
    """A backend is misconfigured; raised before any network call."""


class BackendError(LayoutQAError):
    """A backend call failed permanently."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class EvalError(LayoutQAError):
    """Scoring input is invalid."""


class TableError(LayoutQAError):
    """A table is ragged, empty, or otherwise unrenderable."""


class QaParseError(LayoutQAError):
    """A generated QA response lacks the expected markers."""


class DatasetError(LayoutQAError):
    """Dataset generation produced no usable examples."""
