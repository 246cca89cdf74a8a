"""Factual negative sample construction.

A negative sample is a copy of a gold summary sentence with a few content
words swapped for embedding-similar words from the source article, placed
so the result stays fluent but contradicts the article.  Construction runs
in three stages per summary sentence:

1. Compress: iteratively delete short contiguous spans from the sentence,
   collecting every distinct intermediate result as a candidate fragment.
2. Rank: keep the most fluent candidates by per-token language model
   score, then pick the candidate under which the aligned article context
   sentence is most probable.  That winner is the fragment whose
   vocabulary marks which summary words carry checkable facts.
3. Replace: sample positions whose tokens appear in the fragment
   vocabulary (stopwords and punctuation excluded) up to a budget that is
   a fixed fraction of the sentence length, and swap each for a uniform
   draw among its nearest article-vocabulary neighbors in embedding space.

A random baseline builder swaps arbitrary non-punctuation positions for
arbitrary article words, skipping ranking and embeddings entirely.

All sampling is driven by a per-sentence seed derived from the configured
seed, the document id, the sentence index, and, when dynamic regeneration
is on, the epoch, so rebuilding a corpus is reproducible byte for byte and
independent of worker sharding.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import align_document, context_tokens
from .embed import topk_similar
from .errors import (
    ConstructionFailedError,
    CorpusIOError,
    InvalidMaskError,
    OovQueryError,
    ProtocolError,
    SchemaError,
    TooShortError,
)
from .lm import per_token_logprob, spawn_external
from .validation import (
    as_token_list,
    check_choice,
    check_positive_int,
    check_unit_interval,
    ensure_rng,
    stable_seed,
)

log = logging.getLogger(__name__)

# Function words that never carry checkable facts, so replacement skips
# them.  Deliberately small and fixed: changing it silently changes every
# constructed corpus.
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can cannot could did do does
    doing down during each few for from further had has have having he her
    here hers herself him himself his how i if in into is it its itself just
    me more most my myself near no nor not now of off on once only or other
    our ours ourselves out over own past same she should so some such than
    that the their theirs them themselves then there these they this those
    through to too under until up upon very was we were what when where which
    while who whom why will with would you your yours yourself yourselves
    """.split()
)


def is_punctuation(token):
    """True for tokens with no alphanumeric characters at all."""
    return not any(ch.isalnum() for ch in token)


@dataclass(frozen=True)
class Candidate:
    """A compressed version of a sentence.

    ``kept_positions`` indexes into the original sentence, strictly
    increasing; ``tokens`` is the original restricted to those positions.
    """

    tokens: tuple[str, ...]
    kept_positions: tuple[int, ...]


@dataclass(frozen=True)
class LfnConfig:
    """Knobs for negative sample construction."""

    max_rounds: int = 3
    max_span: int = 3
    rank_topk: int = 10
    replace_topk: int = 5
    replacement_ratio: float = 0.15
    seed: int = 0
    dynamic: bool = False

    def validate(self):
        check_positive_int(self.max_rounds, "max_rounds")
        check_positive_int(self.max_span, "max_span")
        check_positive_int(self.rank_topk, "rank_topk")
        check_positive_int(self.replace_topk, "replace_topk")
        check_unit_interval(self.replacement_ratio, "replacement_ratio")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        return self


@dataclass(frozen=True)
class NegativeSample:
    """One constructed negative with everything needed to audit it."""

    doc_id: str
    sentence_idx: int
    tokens: tuple[str, ...]
    gold_tokens: tuple[str, ...]
    replaced_positions: tuple[int, ...]
    fragment: Candidate | None
    epoch: int
    seed_used: int

    def validate(self):
        if len(self.tokens) != len(self.gold_tokens):
            raise InvalidMaskError("negative and gold differ in length")
        positions = set(self.replaced_positions)
        if len(positions) != len(self.replaced_positions):
            raise InvalidMaskError("replaced positions contain duplicates")
        for i in positions:
            if not 0 <= i < len(self.gold_tokens):
                raise InvalidMaskError(f"replaced position {i} is out of range")
        for i, (got, gold) in enumerate(zip(self.tokens, self.gold_tokens)):
            changed = got != gold
            if changed != (i in positions):
                raise InvalidMaskError(
                    f"position {i} disagrees with the replaced-position mask"
                )
        return self

    def to_record(self):
        return {
            "doc_id": self.doc_id,
            "sentence_idx": self.sentence_idx,
            "gold": list(self.gold_tokens),
            "negative": list(self.tokens),
            "replaced_positions": list(self.replaced_positions),
            "fragment_kept_positions": (
                list(self.fragment.kept_positions) if self.fragment else None
            ),
            "epoch": self.epoch,
            "seed_used": self.seed_used,
        }

    @classmethod
    def from_record(cls, record):
        gold = tuple(record["gold"])
        kept = record.get("fragment_kept_positions")
        fragment = (
            Candidate(tokens=tuple(gold[i] for i in kept), kept_positions=tuple(kept))
            if kept is not None
            else None
        )
        sample = cls(
            doc_id=record["doc_id"],
            sentence_idx=record["sentence_idx"],
            tokens=tuple(record["negative"]),
            gold_tokens=gold,
            replaced_positions=tuple(record["replaced_positions"]),
            fragment=fragment,
            epoch=record["epoch"],
            seed_used=record["seed_used"],
        )
        return sample.validate()


@dataclass(frozen=True)
class Diagnostic:
    """Why one summary sentence produced no negative sample."""

    doc_id: str
    sentence_idx: int
    reason: str
    detail: str = ""


def generate_candidates(sentence, max_rounds=3, max_span=3):
    """All distinct compressions reachable by iterated span deletion.

    Each round deletes one contiguous span of one to ``max_span`` tokens
    from a result of the previous round, never deleting the last token.
    Candidates are deduplicated by kept positions across rounds, and the
    unmodified sentence is not a candidate.  Sentences need at least two
    tokens to compress.
    """
    check_positive_int(max_rounds, "max_rounds")
    check_positive_int(max_span, "max_span")
    tokens = tuple(as_token_list(sentence, "sentence"))
    if len(tokens) < 2:
        raise TooShortError(f"cannot compress a {len(tokens)}-token sentence")

    full = tuple(range(len(tokens)))
    seen = {full}
    frontier = [full]
    results = set()
    for _ in range(max_rounds):
        next_frontier = []
        for kept in frontier:
            width = min(max_span, len(kept) - 1)
            for span in range(1, width + 1):
                for start in range(len(kept) - span + 1):
                    reduced = kept[:start] + kept[start + span :]
                    if reduced not in seen:
                        seen.add(reduced)
                        results.add(reduced)
                        next_frontier.append(reduced)
        frontier = next_frontier
    return {
        Candidate(tokens=tuple(tokens[i] for i in kept), kept_positions=kept)
        for kept in results
    }


def rank_candidates(candidates, context, scorer, rank_topk=10, keep_lowest=False):
    """Two-phase selection of the fragment that best explains the context.

    Phase one orders candidates by per-token log probability, keeping the
    ``rank_topk`` most fluent.  Phase two scores the context sentence
    conditioned on each finalist and returns the candidate making the
    context most probable; ``keep_lowest`` flips phase two to the minimum
    for diagnostic runs.  Ties prefer the shorter candidate, then the
    lexicographically smaller one.
    """
    check_positive_int(rank_topk, "rank_topk")
    pool = list(candidates)
    if not pool:
        raise ConstructionFailedError("no candidates to rank")
    context_toks = as_token_list(context, "context")

    # kept_positions is the last tie-break so candidates with repeated
    # tokens still order independently of set iteration order.
    fluency = sorted(
        pool,
        key=lambda c: (
            -per_token_logprob(scorer, c.tokens),
            len(c.tokens),
            c.tokens,
            c.kept_positions,
        ),
    )
    finalists = fluency[:rank_topk]

    sign = 1.0 if keep_lowest else -1.0
    best = min(
        finalists,
        key=lambda c: (
            sign * scorer.conditional_logprob(context_toks, c.tokens),
            len(c.tokens),
            c.tokens,
            c.kept_positions,
        ),
    )
    return best


def replacement_budget(length, ratio):
    """How many positions to replace in a sentence of ``length`` tokens.

    Uses Python's round (ties to even) on ratio * length, floored at one.
    """
    return max(1, round(ratio * length))


def replaceable_positions(gold_tokens, fragment):
    """Positions eligible for replacement: fragment-vocabulary content words."""
    vocab = set(fragment.tokens)
    return [
        i
        for i, tok in enumerate(gold_tokens)
        if tok in vocab and tok not in STOPWORDS and not is_punctuation(tok)
    ]


def replace_words(
    gold,
    fragment,
    article_vocab,
    table,
    config,
    rng,
    *,
    doc_id="",
    sentence_idx=0,
    epoch=0,
    seed_used=0,
):
    """Swap sampled fragment-vocabulary words for embedding neighbors.

    Positions are drawn uniformly without replacement from the eligible
    set until the budget is met; a position whose token has no vector or
    no in-article neighbor is skipped and another is drawn.  Raises
    ConstructionFailedError when no position could be replaced at all.
    """
    gold_tokens = tuple(as_token_list(gold, "gold sentence"))
    rng = ensure_rng(rng)
    budget = replacement_budget(len(gold_tokens), config.replacement_ratio)
    pool = replaceable_positions(gold_tokens, fragment)
    vocab = set(article_vocab)

    replaced = {}
    while pool and len(replaced) < budget:
        pos = pool.pop(rng.randrange(len(pool)))
        token = gold_tokens[pos]
        try:
            neighbors = topk_similar(token, vocab, config.replace_topk, table)
        except OovQueryError:
            continue
        if not neighbors:
            continue
        choice = neighbors[rng.randrange(len(neighbors))][0]
        replaced[pos] = choice
    if not replaced:
        raise ConstructionFailedError(
            f"no replaceable position in {' '.join(gold_tokens)!r}"
        )

    tokens = tuple(replaced.get(i, tok) for i, tok in enumerate(gold_tokens))
    sample = NegativeSample(
        doc_id=doc_id,
        sentence_idx=sentence_idx,
        tokens=tokens,
        gold_tokens=gold_tokens,
        replaced_positions=tuple(sorted(replaced)),
        fragment=fragment,
        epoch=epoch,
        seed_used=seed_used,
    )
    return sample.validate()


def article_vocabulary(doc):
    """All non-punctuation token types appearing in the article."""
    return {
        tok
        for sentence in doc.article
        for tok in sentence.tokens
        if not is_punctuation(tok)
    }


def sample_seed(config, doc_id, sentence_idx, epoch):
    """Per-sentence seed; epoch enters the mix only for dynamic rebuilds."""
    if config.dynamic:
        return stable_seed(config.seed, doc_id, sentence_idx, epoch)
    return stable_seed(config.seed, doc_id, sentence_idx)


_REASONS = {
    TooShortError: "too_short",
    ConstructionFailedError: "construction_failed",
    OovQueryError: "oov_query",
    ProtocolError: "protocol_error",
}


def build_negative(doc, alignments, scorer, table, config, epoch=0, diagnostics=None):
    """Construct one negative per summary sentence of a document.

    Sentences that cannot produce a negative (too short, nothing
    replaceable, scorer failure) are skipped; the reasons are appended to
    ``diagnostics`` when a list is given.  Returns the successful samples
    in sentence order.
    """
    config.validate()
    # Static construction ignores the epoch entirely, including in the
    # emitted records, so rebuilds at any epoch are byte-identical.
    if not config.dynamic:
        epoch = 0
    vocab = article_vocabulary(doc)
    samples = []
    for alignment in alignments:
        idx = alignment.summary_idx
        gold = doc.summary[idx].tokens
        seed_used = sample_seed(config, doc.doc_id, idx, epoch)
        try:
            candidates = generate_candidates(gold, config.max_rounds, config.max_span)
            fragment = rank_candidates(
                candidates, context_tokens(doc, alignment), scorer, config.rank_topk
            )
            sample = replace_words(
                gold,
                fragment,
                vocab,
                table,
                config,
                ensure_rng(seed_used),
                doc_id=doc.doc_id,
                sentence_idx=idx,
                epoch=epoch,
                seed_used=seed_used,
            )
        except tuple(_REASONS) as exc:
            reason = _REASONS[type(exc)]
            log.debug("skipping %s sentence %d: %s", doc.doc_id, idx, exc)
            if diagnostics is not None:
                diagnostics.append(
                    Diagnostic(doc.doc_id, idx, reason=reason, detail=str(exc))
                )
            continue
        samples.append(sample)
    return samples


def build_random_negative(
    gold,
    article_vocab,
    config,
    rng,
    *,
    doc_id="",
    sentence_idx=0,
    epoch=0,
    seed_used=0,
):
    """Baseline: replace arbitrary non-punctuation positions at random.

    Budget and bookkeeping match the main builder, but positions come from
    the whole sentence and replacement words are uniform over the article
    vocabulary, so no scorer or embedding table is involved.
    """
    gold_tokens = tuple(as_token_list(gold, "gold sentence"))
    rng = ensure_rng(rng)
    budget = replacement_budget(len(gold_tokens), config.replacement_ratio)
    pool = [i for i, tok in enumerate(gold_tokens) if not is_punctuation(tok)]
    vocab = sorted(w for w in article_vocab if not is_punctuation(w))

    replaced = {}
    while pool and len(replaced) < budget:
        pos = pool.pop(rng.randrange(len(pool)))
        choices = [w for w in vocab if w != gold_tokens[pos]]
        if not choices:
            continue
        replaced[pos] = choices[rng.randrange(len(choices))]
    if not replaced:
        raise ConstructionFailedError(
            f"no replaceable position in {' '.join(gold_tokens)!r}"
        )

    tokens = tuple(replaced.get(i, tok) for i, tok in enumerate(gold_tokens))
    sample = NegativeSample(
        doc_id=doc_id,
        sentence_idx=sentence_idx,
        tokens=tokens,
        gold_tokens=gold_tokens,
        replaced_positions=tuple(sorted(replaced)),
        fragment=None,
        epoch=epoch,
        seed_used=seed_used,
    )
    return sample.validate()


def write_negatives(samples, path):
    """Write negative samples as JSONL, sorted by document and sentence."""
    ordered = sorted(samples, key=lambda s: (s.doc_id, s.sentence_idx, s.epoch))
    try:
        with open(path, "w", encoding="utf-8") as handle:
            for sample in ordered:
                handle.write(json.dumps(sample.to_record(), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise CorpusIOError(f"cannot write negatives file {path}: {exc}") from exc


def read_negatives(path):
    """Read a negatives JSONL file back into validated samples."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise CorpusIOError(f"cannot read negatives file {path}: {exc}") from exc
    samples = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            samples.append(NegativeSample.from_record(record))
        except (json.JSONDecodeError, KeyError, TypeError, InvalidMaskError) as exc:
            raise SchemaError(f"line {line_no}: bad negative record ({exc})", line=line_no)
    return samples


def _resolve_scorer(scorer):
    """Accept a live scorer or an argv list; returns (handle, spawned)."""
    if isinstance(scorer, (list, tuple)):
        return spawn_external(list(scorer)), True
    if scorer is None or not hasattr(scorer, "conditional_logprob"):
        raise ValueError("scorer must provide logprob and conditional_logprob")
    return scorer, False


_WORKER_STATE = {}


def _worker_init(scorer_spec, table, config, epoch):
    handle, _ = _resolve_scorer(scorer_spec)
    _WORKER_STATE["scorer"] = handle
    _WORKER_STATE["table"] = table
    _WORKER_STATE["config"] = config
    _WORKER_STATE["epoch"] = epoch


def _worker_build(docs):
    diagnostics = []
    samples = []
    for doc in docs:
        samples.extend(
            build_negative(
                doc,
                align_document(doc),
                _WORKER_STATE["scorer"],
                _WORKER_STATE["table"],
                _WORKER_STATE["config"],
                epoch=_WORKER_STATE["epoch"],
                diagnostics=diagnostics,
            )
        )
    return samples, diagnostics


class NegativeSampleBuilder(BaseEstimator, TransformerMixin):
    """Estimator facade over ``build_negative`` for a whole corpus.

    ``transform`` maps documents to negative samples sorted by document id
    and sentence index; construction diagnostics from the last transform
    are kept on ``diagnostics_``.  The scorer may be a fitted native model
    or an argv list for an external scorer process; argv form is required
    when ``workers`` exceeds one, unless the scorer object can be pickled.
    """

    def __init__(
        self,
        scorer=None,
        embeddings=None,
        max_rounds=3,
        max_span=3,
        rank_topk=10,
        replace_topk=5,
        replacement_ratio=0.15,
        seed=0,
        dynamic=False,
        epoch=0,
        workers=1,
    ):
        self.scorer = scorer
        self.embeddings = embeddings
        self.max_rounds = max_rounds
        self.max_span = max_span
        self.rank_topk = rank_topk
        self.replace_topk = replace_topk
        self.replacement_ratio = replacement_ratio
        self.seed = seed
        self.dynamic = dynamic
        self.epoch = epoch
        self.workers = workers

    def _config(self):
        return LfnConfig(
            max_rounds=self.max_rounds,
            max_span=self.max_span,
            rank_topk=self.rank_topk,
            replace_topk=self.replace_topk,
            replacement_ratio=self.replacement_ratio,
            seed=self.seed,
            dynamic=self.dynamic,
        ).validate()

    def fit(self, X, y=None):
        self._config()
        check_positive_int(self.workers, "workers")
        if self.embeddings is None:
            raise ValueError("embeddings table is required")
        return self

    def transform(self, X):
        self.fit(X)
        docs = list(X)
        config = self._config()
        epoch = self.epoch
        if self.workers > 1 and len(docs) > 1:
            samples, diagnostics = self._transform_parallel(docs, config, epoch)
        else:
            scorer, spawned = _resolve_scorer(self.scorer)
            diagnostics = []
            samples = []
            try:
                for doc in docs:
                    samples.extend(
                        build_negative(
                            doc,
                            align_document(doc),
                            scorer,
                            self.embeddings,
                            config,
                            epoch=epoch,
                            diagnostics=diagnostics,
                        )
                    )
            finally:
                if spawned:
                    scorer.close()
        samples.sort(key=lambda s: (s.doc_id, s.sentence_idx))
        self.diagnostics_ = diagnostics
        return samples

    def _transform_parallel(self, docs, config, epoch):
        workers = min(self.workers, len(docs))
        chunk = (len(docs) + workers - 1) // workers
        batches = [docs[i : i + chunk] for i in range(0, len(docs), chunk)]
        samples = []
        diagnostics = []
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_worker_init,
            initargs=(self.scorer, self.embeddings, config, epoch),
        ) as pool:
            for batch_samples, batch_diagnostics in pool.map(_worker_build, batches):
                samples.extend(batch_samples)
                diagnostics.extend(batch_diagnostics)
        return samples, diagnostics


class RandomNegativeBuilder(BaseEstimator, TransformerMixin):
    """Estimator facade over the random-replacement baseline."""

    def __init__(self, replacement_ratio=0.15, seed=0, dynamic=False, epoch=0):
        self.replacement_ratio = replacement_ratio
        self.seed = seed
        self.dynamic = dynamic
        self.epoch = epoch

    def _config(self):
        return LfnConfig(
            replacement_ratio=self.replacement_ratio,
            seed=self.seed,
            dynamic=self.dynamic,
        ).validate()

    def fit(self, X, y=None):
        self._config()
        return self

    def transform(self, X):
        config = self._config()
        epoch = self.epoch if config.dynamic else 0
        samples = []
        diagnostics = []
        for doc in X:
            vocab = article_vocabulary(doc)
            for idx, sentence in enumerate(doc.summary):
                seed_used = sample_seed(config, doc.doc_id, idx, epoch)
                try:
                    samples.append(
                        build_random_negative(
                            sentence.tokens,
                            vocab,
                            config,
                            ensure_rng(seed_used),
                            doc_id=doc.doc_id,
                            sentence_idx=idx,
                            epoch=epoch,
                            seed_used=seed_used,
                        )
                    )
                except ConstructionFailedError as exc:
                    diagnostics.append(
                        Diagnostic(
                            doc.doc_id, idx, reason="construction_failed", detail=str(exc)
                        )
                    )
        samples.sort(key=lambda s: (s.doc_id, s.sentence_idx))
        self.diagnostics_ = diagnostics
        return samples
