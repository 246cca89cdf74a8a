"""Synthetic corpora with planted, checkable facts.

Every generated document follows the same four-sentence shape:

    opener
    "<name> <verb> the <object> <link> <tail> near the <place>"
    "<tail> near the <place> it stayed"
    closer

with a one-sentence summary "<name> <verb> the <object> <link>".  The tail
word is a function of the object, so the trigram (object, link, tail) is
the fact hook: the context sentence opens with the tail, and an order-3
model trained on the article streams finds the context far more probable
after the true (object, link) pair than after any corrupted one.  That
makes these corpora a controlled instrument for the negative-construction
quality checks and for training the small sequence model.

Generation is fully determined by the seed.
"""

from __future__ import annotations

import numpy as np

from .corpus import make_document
from .embed import EmbeddingTable
from .validation import ensure_rng, stable_seed

NAMES = ["alice", "bob", "carol", "david", "erin", "frank", "grace", "henry"]
VERBS = ["saw", "heard", "watched", "noticed"]
OBJECTS = [
    "kite", "drum", "lamp", "boat", "clock", "garden",
    "engine", "mirror", "piano", "statue", "bridge", "lantern",
]
LINKS = ["soar", "hum", "glow", "sway"]
TAILS = {
    "kite": "skyward", "drum": "thunder", "lamp": "amber", "boat": "seaward",
    "clock": "midnight", "garden": "bloom", "engine": "steam", "mirror": "silver",
    "piano": "melody", "statue": "marble", "bridge": "arches", "lantern": "ember",
}
PLACES = ["barn", "harbor", "market", "meadow", "tower", "cellar", "orchard", "plaza"]
OPENERS = [
    "the morning felt calm",
    "the town woke slowly",
    "a quiet week had passed",
    "the weather stayed mild",
]
CLOSERS = [
    "everyone went home before dark",
    "the crowd drifted away at dusk",
    "the streets fell quiet that night",
    "nothing else happened that day",
]


def planted_facts_corpus(n_docs=200, seed=0):
    """Generate ``n_docs`` documents with one planted fact each."""
    docs = []
    for i in range(n_docs):
        rng = ensure_rng(stable_seed("planted", seed, i))
        name = rng.choice(NAMES)
        verb = rng.choice(VERBS)
        obj = rng.choice(OBJECTS)
        link = rng.choice(LINKS)
        tail = TAILS[obj]
        place = rng.choice(PLACES)
        article = [
            rng.choice(OPENERS),
            f"{name} {verb} the {obj} {link} {tail} near the {place}",
            f"{tail} near the {place} it stayed",
            rng.choice(CLOSERS),
        ]
        summary = [f"{name} {verb} the {obj} {link}"]
        docs.append(make_document(f"doc{i:04d}", article, summary))
    return docs


def corpus_embeddings(docs, dim=8, seed=0):
    """A random unit-vector embedding table covering the corpus vocabulary."""
    words = sorted(
        {
            tok
            for doc in docs
            for sentence in (*doc.article, *doc.summary)
            for tok in sentence.tokens
        }
    )
    rng = np.random.default_rng(stable_seed("embeddings", seed))
    matrix = rng.normal(size=(len(words), dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    return EmbeddingTable(words, matrix)


def copy_task_pairs(n_pairs=120, vocab_size=20, length=7, seed=0):
    """Training pairs whose target simply repeats the source tokens."""
    from .contrast import TrainingPair

    rng = ensure_rng(stable_seed("copy", seed))
    vocab = [f"w{i:02d}" for i in range(vocab_size)]
    pairs = []
    for _ in range(n_pairs):
        tokens = [vocab[rng.randrange(vocab_size)] for _ in range(length)]
        pairs.append(
            TrainingPair(
                article=tuple(tokens),
                gold=tuple(tokens),
                negatives=(),
                replaced_positions=(),
            )
        )
    return pairs


def training_pairs(docs, samples):
    """Assemble (article, gold, negatives) training pairs from a corpus.

    One pair per summary sentence; the article side is the concatenated
    article token stream.  Sentences with no constructed negative yield a
    pair with an empty negative set.
    """
    from .contrast import TrainingPair

    by_key = {}
    for sample in samples:
        by_key.setdefault((sample.doc_id, sample.sentence_idx), []).append(sample)
    pairs = []
    for doc in docs:
        article = tuple(tok for sentence in doc.article for tok in sentence.tokens)
        for idx, sentence in enumerate(doc.summary):
            matched = by_key.get((doc.doc_id, idx), [])
            pairs.append(
                TrainingPair(
                    article=article,
                    gold=tuple(sentence.tokens),
                    negatives=tuple(tuple(s.tokens) for s in matched),
                    replaced_positions=tuple(tuple(s.replaced_positions) for s in matched),
                )
            )
    return pairs
