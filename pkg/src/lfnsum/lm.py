"""Language model scorers: a native n-gram backend and an external process.

Both backends expose the same two scoring operations over natural-log
probabilities:

* ``logprob(tokens)``: joint score of a token sequence.
* ``conditional_logprob(target, condition)``: score of the target tokens
  with the condition tokens as preceding context; only target tokens
  contribute terms, so for chain-rule-consistent backends with sentence
  markers disabled it equals ``logprob(condition + target) -
  logprob(condition)``.

A scorer constructed with ``normalization="per_token"`` divides each result
by the number of input tokens scored (the target length for conditionals).

External scorers are child processes speaking line-delimited UTF-8 JSON on
stdin/stdout, one object per line, flushed per line, one request in flight
at a time.  Requests carry a client-chosen ``id`` echoed back verbatim:

    {"id": 1, "op": "ping"}                               -> {"id": 1, "pong": true}
    {"id": 2, "op": "logprob", "text": [...]}             -> {"id": 2, "logprob": -12.3}
    {"id": 3, "op": "cond", "target": [...],
               "condition": [...]}                        -> {"id": 3, "logprob": -4.5}

A failing request yields {"id": ..., "error": "message"} instead.  Any
other shape, an id mismatch, a dead pipe, or a timeout raises
ProtocolError with the offending line attached.
"""

from __future__ import annotations

import json
import logging
import math
import select
import subprocess
from collections import Counter

from sklearn.base import BaseEstimator

from .errors import EmptyCorpusError, ProtocolError, SpawnError
from .validation import as_token_list, check_choice, check_non_negative, check_order

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

MODEL_FORMAT = "lfnsum-ngram"
MODEL_VERSION = 1


class NGramLanguageModel(BaseEstimator):
    """Count-based n-gram model with add-k smoothing over a backoff prior.

    The probability of a token given its context interpolates the observed
    count with the next-lower-order distribution:

        p_m(v | c) = (count(c, v) + k * E * p_{m-1}(v | c[1:]))
                     / (count(c) + k * E)

    where E is the emission alphabet size (vocabulary plus the unknown
    symbol) and the order-0 prior is uniform, 1 / E.  For a unigram model
    this reduces to plain add-k.  With k = 0 the model is maximum
    likelihood and falls back to the lower order only on unseen contexts;
    unseen events then score zero probability.

    Sentence markers: models of order two and above pad each training and
    scoring sequence with ``order - 1`` begin markers and one end marker,
    and the end marker is part of the vocabulary.  Begin markers appear
    only as context and are never predicted.  Unigram models use no
    markers, and ``sentence_markers=False`` disables them everywhere.

    Parameters
    ----------
    order : int, n-gram order, at least 1.
    k : float, add-k smoothing constant; 0 selects maximum likelihood.
    sentence_markers : bool, pad sequences with begin/end markers.
    normalization : "total" or "per_token" result scaling.
    """

    def __init__(self, order=3, k=0.01, sentence_markers=True, normalization="total"):
        self.order = order
        self.k = k
        self.sentence_markers = sentence_markers
        self.normalization = normalization

    def _validate_params(self):
        check_order(self.order, "order")
        check_non_negative(self.k, "k")
        check_choice(self.normalization, ("total", "per_token"), "normalization")

    def _markers_active(self):
        return bool(self.sentence_markers) and self.order > 1

    def fit(self, X, y=None):
        """Count n-grams of every order up to ``order`` from token sequences.

        ``X`` is an iterable of token sequences (lists of strings or
        TokenSeq values).  Returns self.
        """
        self._validate_params()
        sequences = [as_token_list(seq, "training sequence") for seq in X]
        if not sequences:
            raise EmptyCorpusError("cannot fit a language model on an empty corpus")

        vocab = set()
        counts = {m: {} for m in range(1, self.order + 1)}
        pad = self._markers_active()
        for seq in sequences:
            vocab.update(seq)
            padded = [BOS] * (self.order - 1) + seq + [EOS] if pad else seq
            for m in range(1, self.order + 1):
                table = counts[m]
                for i in range(m - 1, len(padded)):
                    token = padded[i]
                    if token == BOS:
                        continue
                    ctx = tuple(padded[i - m + 1 : i])
                    table.setdefault(ctx, Counter())[token] += 1
        if pad:
            vocab.add(EOS)

        self.vocab_ = frozenset(vocab)
        self.counts_ = counts
        self.totals_ = {
            m: {ctx: sum(counter.values()) for ctx, counter in table.items()}
            for m, table in counts.items()
        }
        self.emission_size_ = len(self.vocab_) + 1  # vocabulary plus UNK
        return self

    def _check_fitted(self):
        if not hasattr(self, "counts_"):
            raise EmptyCorpusError("language model is not fitted")

    def _map_token(self, token):
        if token in self.vocab_ or token == BOS:
            return token
        return UNK

    def probability(self, token, context=()):
        """Smoothed probability of ``token`` after ``context`` tokens.

        The context may be shorter than ``order - 1``; scoring then happens
        at the matching lower order.  Out-of-vocabulary tokens, in either
        position, are mapped to the unknown symbol.
        """
        self._check_fitted()
        token = self._map_token(token)
        ctx = tuple(self._map_token(t) for t in context)
        if len(ctx) > self.order - 1:
            ctx = ctx[len(ctx) - self.order + 1 :]
        return self._prob(token, ctx)

    def _prob(self, token, ctx):
        m = len(ctx) + 1
        if m == 1:
            count = self.counts_[1].get((), {}).get(token, 0)
            total = self.totals_[1].get((), 0)
            prior = 1.0 / self.emission_size_
        else:
            counter = self.counts_[m].get(ctx)
            count = counter.get(token, 0) if counter else 0
            total = self.totals_[m].get(ctx, 0)
            prior = self._prob(token, ctx[1:])
        if self.k > 0:
            weight = self.k * self.emission_size_
            return (count + weight * prior) / (total + weight)
        if total > 0:
            return count / total
        return prior

    def _positions(self, tokens, condition=None):
        """Yield (token, context) pairs for every scored position."""
        pad = self._markers_active()
        prefix = [BOS] * (self.order - 1) if pad else []
        prefix += list(condition) if condition is not None else []
        seq = prefix + list(tokens)
        if condition is None and pad:
            seq = seq + [EOS]
        for i in range(len(prefix), len(seq)):
            lo = max(0, i - self.order + 1)
            yield seq[i], tuple(seq[lo:i])

    def _score(self, tokens, condition, denom):
        total = 0.0
        for token, ctx in self._positions(tokens, condition):
            p = self.probability(token, ctx)
            total += math.log(p) if p > 0.0 else float("-inf")
        if self.normalization == "per_token":
            return total / denom
        return total

    def logprob(self, text):
        """Natural-log probability of a token sequence."""
        self._check_fitted()
        tokens = as_token_list(text, "text")
        return self._score(tokens, None, len(tokens))

    def conditional_logprob(self, target, condition):
        """Log probability of ``target`` given ``condition`` as prefix.

        Only target tokens contribute terms; no end marker is appended.
        The condition may be empty, in which case this matches ``logprob``
        up to the missing end-marker term.
        """
        self._check_fitted()
        target_tokens = as_token_list(target, "target")
        condition_tokens = list(getattr(condition, "tokens", condition) or [])
        return self._score(target_tokens, condition_tokens, len(target_tokens))

    def save(self, path):
        """Serialize the fitted model as JSON."""
        self._check_fitted()
        counts = {
            str(m): {
                " ".join(ctx): dict(counter) for ctx, counter in table.items()
            }
            for m, table in self.counts_.items()
        }
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "order": self.order,
            "k": self.k,
            "sentence_markers": bool(self.sentence_markers),
            "normalization": self.normalization,
            "vocab": sorted(self.vocab_),
            "counts": counts,
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, ensure_ascii=False)
            handle.write("\n")

    @classmethod
    def load(cls, path):
        """Restore a model serialized by ``save``."""
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        if payload.get("format") != MODEL_FORMAT:
            raise EmptyCorpusError(f"not a language model file: {path}")
        model = cls(
            order=payload["order"],
            k=payload["k"],
            sentence_markers=payload["sentence_markers"],
            normalization=payload.get("normalization", "total"),
        )
        model._validate_params()
        model.vocab_ = frozenset(payload["vocab"])
        model.counts_ = {
            int(m): {
                tuple(ctx.split(" ")) if ctx else (): Counter(counter)
                for ctx, counter in table.items()
            }
            for m, table in payload["counts"].items()
        }
        model.totals_ = {
            m: {ctx: sum(counter.values()) for ctx, counter in table.items()}
            for m, table in model.counts_.items()
        }
        model.emission_size_ = len(model.vocab_) + 1
        return model


def train_ngram(sequences, order=3, k=0.01, sentence_markers=True, normalization="total"):
    """Convenience wrapper: fit an NGramLanguageModel on token sequences."""
    model = NGramLanguageModel(
        order=order, k=k, sentence_markers=sentence_markers, normalization=normalization
    )
    return model.fit(sequences)


class ExternalScorer:
    """Client for a scorer child process speaking the line JSON protocol.

    One request is in flight at a time.  Responses must echo the request
    id; anything else is a protocol violation.  Close the scorer (or use
    it as a context manager) to terminate the child.
    """

    def __init__(self, command, timeout=10.0, normalization="total"):
        check_choice(normalization, ("total", "per_token"), "normalization")
        self.command = list(command)
        self.timeout = timeout
        self.normalization = normalization
        self._next_id = 0
        self._buffer = b""
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,
            )
        except OSError as exc:
            raise SpawnError(f"cannot start scorer {self.command!r}: {exc}") from exc

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        self._proc = None
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=2.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def _read_line(self):
        # Raw reads with an explicit buffer; a buffered wrapper would hide
        # already-arrived bytes from select and fake a timeout.
        proc = self._proc
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([proc.stdout], [], [], self.timeout)
            if not ready:
                raise ProtocolError(f"scorer did not answer within {self.timeout}s")
            chunk = proc.stdout.read1(65536)
            if chunk == b"":
                raise ProtocolError("scorer closed its output mid-stream")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8", errors="replace")

    def _request(self, payload):
        if self._proc is None or self._proc.poll() is not None:
            raise ProtocolError("scorer process is not running")
        self._next_id += 1
        payload = {"id": self._next_id, **payload}
        try:
            self._proc.stdin.write(
                (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8")
            )
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ProtocolError(f"cannot write to scorer: {exc}") from exc
        line = self._read_line()
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"scorer sent invalid JSON: {exc.msg}", line=line)
        if not isinstance(response, dict) or response.get("id") != self._next_id:
            raise ProtocolError("scorer response id does not match the request", line=line)
        if "error" in response:
            raise ProtocolError(f"scorer reported: {response['error']}", line=line)
        return response

    def ping(self):
        """Health check; raises ProtocolError unless the child answers pong."""
        response = self._request({"op": "ping"})
        if response.get("pong") is not True:
            raise ProtocolError("scorer did not answer the ping", line=json.dumps(response))

    def _logprob_of(self, response, line_hint, denom):
        value = response.get("logprob")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ProtocolError("scorer response lacks a numeric logprob", line=line_hint)
        value = float(value)
        if self.normalization == "per_token":
            return value / denom
        return value

    def logprob(self, text):
        tokens = as_token_list(text, "text")
        response = self._request({"op": "logprob", "text": tokens})
        return self._logprob_of(response, json.dumps(response), len(tokens))

    def conditional_logprob(self, target, condition):
        target_tokens = as_token_list(target, "target")
        condition_tokens = list(getattr(condition, "tokens", condition) or [])
        response = self._request(
            {"op": "cond", "target": target_tokens, "condition": condition_tokens}
        )
        return self._logprob_of(response, json.dumps(response), len(target_tokens))


def spawn_external(command, timeout=10.0, normalization="total"):
    """Start an external scorer and health-check it with a ping.

    ``command`` is an argv list.  Raises SpawnError when the process cannot
    start or fails the initial ping.
    """
    if isinstance(command, str):
        raise SpawnError("command must be an argv list, not a string")
    scorer = ExternalScorer(command, timeout=timeout, normalization=normalization)
    try:
        scorer.ping()
    except ProtocolError as exc:
        scorer.close()
        raise SpawnError(f"scorer failed its startup ping: {exc}") from exc
    return scorer


def per_token_logprob(scorer, tokens):
    """Length-normalized logprob regardless of the scorer's own mode."""
    tokens = as_token_list(tokens, "text")
    value = scorer.logprob(tokens)
    if getattr(scorer, "normalization", "total") == "per_token":
        return value
    return value / len(tokens)
