"""Exception types shared across the package.

Every error raised on purpose by this package derives from LfnsumError, so
callers can catch one base class at pipeline boundaries.  Exceptions carry a
plain message; where a line number is meaningful (corpus and embedding
parsers) it is exposed as a ``line`` attribute as well.
"""


class LfnsumError(Exception):
    """Base class for all errors raised by this package."""


class EmptyTextError(LfnsumError):
    """A text or token sequence was empty where content is required."""


class InvalidOrderError(LfnsumError):
    """An n-gram or metric order was zero, negative, or otherwise unusable."""


class SchemaError(LfnsumError):
    """A corpus record did not match the expected JSON shape."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class CorpusIOError(LfnsumError):
    """A corpus file could not be read or written."""


class EmptyCorpusError(LfnsumError):
    """A model was asked to train on an empty corpus."""


class SpawnError(LfnsumError):
    """An external scorer process could not be started or failed its health check."""


class ProtocolError(LfnsumError):
    """An external scorer broke the line-delimited JSON contract."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class FormatError(LfnsumError):
    """An embedding file line could not be parsed."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class EmptyTableError(LfnsumError):
    """An embedding table contained no usable vectors."""


class ZeroVectorError(LfnsumError):
    """Cosine similarity was asked for a zero-norm vector."""


class OovQueryError(LfnsumError):
    """A similarity query word is absent from the embedding table."""


class TooShortError(LfnsumError):
    """A sentence was too short to compress into candidates."""


class ConstructionFailedError(LfnsumError):
    """No replaceable position survived, so no negative sample exists."""


class InvalidMaskError(LfnsumError):
    """A replaced-position set referenced positions outside the sequence."""


class EmptyReportError(LfnsumError):
    """A report was requested over zero samples."""
