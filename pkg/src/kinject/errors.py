"""Exception types shared across the package.

Exit-code mapping used by the CLI lives in ``cli.py``; library code raises
these without knowing about processes.
"""


class KinjectError(Exception):
    """Base class for all package errors."""


class DuplicateDocumentError(KinjectError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document id: {doc_id!r}")
        self.doc_id = doc_id


class EmptyQueryError(KinjectError):
    """Query tokenized to nothing, so no retrieval is possible."""


class InvalidTokenError(KinjectError):
    """A token id is outside the model vocabulary."""


class FormatVersionError(KinjectError):
    """A persisted artifact carries an unsupported format version."""


class NumericFailure(KinjectError):
    """A non-finite value appeared where the math requires finite numbers."""

    def __init__(self, message: str, context: dict | None = None):
        super().__init__(message)
        self.context = context or {}


class OracleScaleError(KinjectError):
    """A brute-force oracle was asked to run beyond its size guard."""


class SourceUnavailableError(KinjectError):
    """An external knowledge source could not be reached."""


class ConfigError(KinjectError):
    """Bad configuration or a missing/unloadable artifact file."""


class DialogParseError(KinjectError):
    """A dialog input file could not be parsed."""
