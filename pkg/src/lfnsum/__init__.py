"""Factual negative sample construction and contrastive training, desk scale.

The package is organized around one pipeline: ingest a corpus, train or
attach a language model scorer, compress each summary sentence into a
fragment that best predicts its article context, swap embedding-similar
article words into the summary to plant factual errors, then train a small
sequence-to-sequence model whose loss contrasts the gold summary against
those negatives at both the encoder and the decoder.
"""

from .errors import (
    ConstructionFailedError,
    CorpusIOError,
    EmptyCorpusError,
    EmptyReportError,
    EmptyTableError,
    EmptyTextError,
    FormatError,
    InvalidMaskError,
    InvalidOrderError,
    LfnsumError,
    OovQueryError,
    ProtocolError,
    SchemaError,
    SpawnError,
    TooShortError,
    ZeroVectorError,
)

__version__ = "0.1.0"

__all__ = [
    "ConstructionFailedError",
    "CorpusIOError",
    "EmptyCorpusError",
    "EmptyReportError",
    "EmptyTableError",
    "EmptyTextError",
    "FormatError",
    "InvalidMaskError",
    "InvalidOrderError",
    "LfnsumError",
    "OovQueryError",
    "ProtocolError",
    "SchemaError",
    "SpawnError",
    "TooShortError",
    "ZeroVectorError",
    "__version__",
]
