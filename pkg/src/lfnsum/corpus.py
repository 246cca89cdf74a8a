"""Corpus ingestion and alignment.

Documents arrive as JSON lines, one object per line:

    {"id": "doc-1", "article": "Text. More text.", "summary": ["One line."]}

``article`` and ``summary`` may each be a flat string, split here into
sentences on terminal punctuation, or a pre-split list of sentence strings
taken as given.  Tokenization lowercases and separates punctuation, so the
token stream is reproducible from the raw text alone.

This module also scores summary sentences against article sentences with
ROUGE and picks, per summary sentence, the best-matching article sentence
(the oracle) and the sentence right after it (the context).  Downstream
stages lean on that alignment: candidate compressions of a summary sentence
are judged by how well they predict the context sentence.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass

from .errors import CorpusIOError, EmptyTextError, SchemaError
from .validation import as_token_list, check_order

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class TokenSeq:
    """A tokenized sentence plus the raw text it came from."""

    tokens: tuple[str, ...]
    raw: str

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    """One article/summary pair, both stored as tokenized sentences."""

    doc_id: str
    article: tuple[TokenSeq, ...]
    summary: tuple[TokenSeq, ...]


@dataclass(frozen=True)
class Alignment:
    """Oracle and context article indices for one summary sentence.

    ``context_idx`` is None when the oracle is the last article sentence;
    consumers then fall back to the oracle sentence itself as context and
    ``fallback_used`` records that.
    """

    summary_idx: int
    oracle_idx: int
    context_idx: int | None
    fallback_used: bool


def tokenize(text):
    """Lowercase ``text`` and split it into word and punctuation tokens.

    Joining the tokens with single spaces and tokenizing again yields the
    same list, which keeps serialized corpora stable across round trips.
    """
    if not isinstance(text, str) or not text.strip():
        raise EmptyTextError("cannot tokenize empty text")
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        raise EmptyTextError(f"no tokens survive in {text!r}")
    return TokenSeq(tokens=tuple(tokens), raw=text)


def split_sentences(text):
    """Split a flat string into sentence strings on terminal punctuation."""
    if not isinstance(text, str) or not text.strip():
        raise EmptyTextError("cannot split empty text into sentences")
    parts = [p.strip() for p in _SENTENCE_SPLIT_RE.split(text.strip())]
    return [p for p in parts if p]


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate, reference, n):
    """Clipped n-gram overlap F1 between two token sequences.

    Returns 0.0 when either side has no n-grams of the requested order.
    Symmetric in its sequence arguments, 1.0 only for identical sequences
    (at n = 1, for equal bags of tokens).
    """
    check_order(n, "n")
    cand = as_token_list(candidate, "candidate")
    ref = as_token_list(reference, "reference")
    cand_counts = _ngram_counts(cand, n)
    ref_counts = _ngram_counts(ref, n)
    total_cand = sum(cand_counts.values())
    total_ref = sum(ref_counts.values())
    if total_cand == 0 or total_ref == 0:
        return 0.0
    overlap = sum((cand_counts & ref_counts).values())
    if overlap == 0:
        return 0.0
    precision = overlap / total_cand
    recall = overlap / total_ref
    return 2.0 * precision * recall / (precision + recall)


def _lcs_length(a, b):
    # One-row dynamic program; O(len(a) * len(b)) time, O(len(b)) space.
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(candidate, reference):
    """Longest-common-subsequence F1 between two token sequences."""
    cand = as_token_list(candidate, "candidate")
    ref = as_token_list(reference, "reference")
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2.0 * precision * recall / (precision + recall)


def oracle_score(candidate, reference):
    """Mean of unigram and bigram ROUGE F1, the oracle-selection criterion."""
    return 0.5 * (rouge_n(candidate, reference, 1) + rouge_n(candidate, reference, 2))


def select_oracle(summary_sentence, article_sentences, summary_idx=0):
    """Pick the article sentence that best matches one summary sentence.

    The oracle maximizes the mean of ROUGE-1 and ROUGE-2 F1; ties go to the
    smallest article index.  The context is the sentence after the oracle
    when one exists, otherwise the alignment records the fallback.
    """
    sentences = list(article_sentences)
    if not sentences:
        raise EmptyTextError("article has no sentences to align against")
    summary_tokens = as_token_list(summary_sentence, "summary sentence")
    best_idx = 0
    best_score = -1.0
    for idx, sentence in enumerate(sentences):
        score = oracle_score(summary_tokens, sentence)
        if score > best_score:
            best_score = score
            best_idx = idx
    has_next = best_idx + 1 < len(sentences)
    return Alignment(
        summary_idx=summary_idx,
        oracle_idx=best_idx,
        context_idx=best_idx + 1 if has_next else None,
        fallback_used=not has_next,
    )


def align_document(doc):
    """Alignments for every summary sentence of ``doc``, in summary order."""
    return [
        select_oracle(sent, doc.article, summary_idx=idx)
        for idx, sent in enumerate(doc.summary)
    ]


def context_tokens(doc, alignment):
    """The context sentence tokens an alignment points at.

    Falls back to the oracle sentence itself when it has no successor.
    """
    idx = alignment.context_idx if alignment.context_idx is not None else alignment.oracle_idx
    return list(doc.article[idx].tokens)


def _as_sentence_list(value, field, line_no):
    if isinstance(value, str):
        try:
            return split_sentences(value)
        except EmptyTextError:
            raise SchemaError(f"line {line_no}: field {field!r} is empty", line=line_no)
    if isinstance(value, list) and value and all(isinstance(s, str) and s.strip() for s in value):
        return [s.strip() for s in value]
    raise SchemaError(
        f"line {line_no}: field {field!r} must be a non-empty string or list of strings",
        line=line_no,
    )


def make_document(doc_id, article, summary, line_no=0):
    """Build a Document from raw fields, validating shape as we go."""
    if not isinstance(doc_id, str) or not doc_id:
        raise SchemaError(f"line {line_no}: field 'id' must be a non-empty string", line=line_no)
    article_sents = _as_sentence_list(article, "article", line_no)
    summary_sents = _as_sentence_list(summary, "summary", line_no)
    return Document(
        doc_id=doc_id,
        article=tuple(tokenize(s) for s in article_sents),
        summary=tuple(tokenize(s) for s in summary_sents),
    )


def load_corpus(path, strict=False):
    """Read a JSONL corpus file into Documents.

    In lenient mode (the default) malformed lines and duplicate ids are
    logged with their line number and skipped; strict mode raises
    SchemaError at the first offender.  An unreadable file raises
    CorpusIOError either way.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise CorpusIOError(f"cannot read corpus file {path}: {exc}") from exc

    docs = []
    seen_ids = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {line_no}: invalid JSON ({exc.msg})", line=line_no)
            if not isinstance(record, dict):
                raise SchemaError(f"line {line_no}: record must be an object", line=line_no)
            for field in ("id", "article", "summary"):
                if field not in record:
                    raise SchemaError(f"line {line_no}: missing field {field!r}", line=line_no)
            doc = make_document(record["id"], record["article"], record["summary"], line_no)
            if doc.doc_id in seen_ids:
                raise SchemaError(f"line {line_no}: duplicate id {doc.doc_id!r}", line=line_no)
        except SchemaError:
            if strict:
                raise
            log.warning("skipping corpus line %d: %s", line_no, "malformed record")
            continue
        seen_ids.add(doc.doc_id)
        docs.append(doc)
    if not docs:
        log.warning("corpus file %s yielded no documents", path)
    return docs


def save_corpus(docs, path):
    """Write Documents back out as JSONL with pre-split sentence lists."""
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for doc in docs:
                record = {
                    "id": doc.doc_id,
                    "article": [s.raw for s in doc.article],
                    "summary": [s.raw for s in doc.summary],
                }
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise CorpusIOError(f"cannot write corpus file {path}: {exc}") from exc


def write_alignments(docs, path):
    """Dump per-summary-sentence alignments for a corpus as JSONL."""
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for doc in docs:
                for alignment in align_document(doc):
                    record = {
                        "id": doc.doc_id,
                        "summary_idx": alignment.summary_idx,
                        "oracle_idx": alignment.oracle_idx,
                        "context_idx": alignment.context_idx,
                        "fallback_used": alignment.fallback_used,
                    }
                    handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise CorpusIOError(f"cannot write alignments file {path}: {exc}") from exc


def lm_sequences(docs, granularity="document", include_summaries=False):
    """Token sequences to train a language model on.

    Document granularity concatenates each article into one stream, so the
    model sees sentence-boundary transitions; sentence granularity keeps
    every sentence separate.
    """
    if granularity not in ("document", "sentence"):
        raise ValueError(f"granularity must be 'document' or 'sentence', got {granularity!r}")
    sequences = []
    for doc in docs:
        groups = [doc.article] + ([doc.summary] if include_summaries else [])
        for group in groups:
            if granularity == "document":
                stream = [tok for sent in group for tok in sent.tokens]
                sequences.append(stream)
            else:
                sequences.extend(list(sent.tokens) for sent in group)
    return sequences
