"""Word embedding tables and nearest-neighbor lookup.

The on-disk format is text, one word per line followed by its vector
components, optionally preceded by a single "count dimension" header line:

    3 4
    cat 0.1 0.2 0.3 0.4
    dog 0.0 1.0 0.0 1.0
    eel 0.5 0.5 0.5 0.5

All similarity here is cosine similarity, computed by exhaustive scan over
the requested candidate words.  Tables are immutable once loaded.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import EmptyTableError, FormatError, OovQueryError, ZeroVectorError

log = logging.getLogger(__name__)


class EmbeddingTable:
    """An immutable word-to-vector mapping backed by one numpy matrix."""

    def __init__(self, words, matrix):
        if len(words) == 0:
            raise EmptyTableError("embedding table has no entries")
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise FormatError("embedding matrix shape does not match the word list")
        self._index = {w: i for i, w in enumerate(words)}
        if len(self._index) != len(words):
            raise FormatError("embedding word list contains duplicates")
        self._matrix = matrix
        self._matrix.setflags(write=False)

    def __contains__(self, word):
        return word in self._index

    def __len__(self):
        return len(self._index)

    @property
    def dim(self):
        return self._matrix.shape[1]

    @property
    def words(self):
        return list(self._index)

    def vector(self, word):
        try:
            return self._matrix[self._index[word]]
        except KeyError:
            raise OovQueryError(f"word {word!r} is not in the embedding table") from None


def load_embeddings(path):
    """Parse a text embedding file into an EmbeddingTable.

    A first line of exactly two integer fields is treated as a count and
    dimension header.  Later duplicates of a word override earlier ones
    with a warning.  Inconsistent dimensions or unparseable components
    raise FormatError carrying the line number; a file with no usable
    vectors raises EmptyTableError.
    """
    vectors = {}
    dim = None
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise FormatError(f"cannot read embedding file {path}: {exc}") from exc

    start = 0
    if lines:
        fields = lines[0].split()
        if len(fields) == 2:
            try:
                int(fields[0]), int(fields[1])
                start = 1
            except ValueError:
                start = 0
    for line_no, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) < 2:
            raise FormatError(f"line {line_no}: no vector components", line=line_no)
        word = fields[0]
        try:
            values = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise FormatError(f"line {line_no}: bad component ({exc})", line=line_no)
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise FormatError(
                f"line {line_no}: expected {dim} components, got {len(values)}",
                line=line_no,
            )
        if word in vectors:
            log.warning("embedding file %s: duplicate word %r, last one wins", path, word)
        vectors[word] = values
    if not vectors:
        raise EmptyTableError(f"embedding file {path} has no vectors")
    words = list(vectors)
    return EmbeddingTable(words, np.array([vectors[w] for w in words]))


def save_embeddings(table, path, header=True):
    """Write a table back out in the text format, one word per line."""
    with open(path, "w", encoding="utf-8") as handle:
        if header:
            handle.write(f"{len(table)} {table.dim}\n")
        for word in table.words:
            components = " ".join(repr(float(v)) for v in table.vector(word))
            handle.write(f"{word} {components}\n")


def cosine(u, v):
    """Cosine similarity of two vectors; zero-norm inputs are an error."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity of a zero vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


def topk_similar(query, candidate_vocab, k, table):
    """The up-to-k candidate words most cosine-similar to ``query``.

    Candidates absent from the table are ignored, the query word itself is
    excluded, and results are ordered by descending similarity with ties
    broken lexicographically, so the outcome is reproducible across runs.
    Returns a list of (word, similarity) pairs; raises OovQueryError when
    the query itself has no vector.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    query_vec = table.vector(query)
    scored = []
    for word in set(candidate_vocab):
        if word == query or word not in table:
            continue
        scored.append((word, cosine(query_vec, table.vector(word))))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
