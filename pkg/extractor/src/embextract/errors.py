"""Exception types for the extractor.

InputError and its subclasses mark bad inputs (CLI exit code 2); ModelError
and CountMismatchError are runtime failures (exit code 1).
"""


class ExtractorError(Exception):
    """Base class for all extractor failures."""


class InputError(ExtractorError, ValueError):
    """Input violates a documented precondition (bad file, flag, or format)."""


class ModelError(ExtractorError, RuntimeError):
    """The embedding backend failed to load or to encode a batch."""


class CountMismatchError(ExtractorError, RuntimeError):
    """The backend returned a different number of rows than sentences given."""
