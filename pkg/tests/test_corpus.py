"""Tokenization, ROUGE scoring, oracle alignment, and corpus round trips."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfnsum.corpus import (
    Alignment,
    align_document,
    context_tokens,
    lm_sequences,
    load_corpus,
    make_document,
    oracle_score,
    rouge_l,
    rouge_n,
    save_corpus,
    select_oracle,
    split_sentences,
    tokenize,
    write_alignments,
)
from lfnsum.errors import (
    CorpusIOError,
    EmptyTextError,
    InvalidOrderError,
    SchemaError,
)

words = st.text(alphabet="abcd", min_size=1, max_size=4)
token_lists = st.lists(words, min_size=1, max_size=8)


class TestTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert list(tokenize("The cat sat.").tokens) == ["the", "cat", "sat", "."]

    def test_interior_punctuation_becomes_tokens(self):
        assert list(tokenize("Hello, world").tokens) == ["hello", ",", "world"]

    def test_numbers_and_hyphens(self):
        assert list(tokenize("a 26-year-old").tokens) == [
            "a", "26", "-", "year", "-", "old",
        ]

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyTextError):
            tokenize("   ")

    @given(st.text(min_size=1).filter(lambda t: t.strip()))
    @settings(max_examples=200)
    def test_idempotent_on_joined_output(self, text):
        """Tokenizing the space-joined tokens reproduces the token list."""
        try:
            first = tokenize(text).tokens
        except EmptyTextError:
            return
        again = tokenize(" ".join(first)).tokens
        assert again == first


class TestSentenceSplit:
    def test_splits_on_terminal_punctuation(self):
        assert split_sentences("A b. C d! E?") == ["A b.", "C d!", "E?"]

    def test_single_sentence_passes_through(self):
        assert split_sentences("no terminal punctuation here") == [
            "no terminal punctuation here"
        ]


class TestRougeN:
    def test_unigram_two_of_three(self):
        got = rouge_n(["the", "cat", "sat"], ["the", "cat", "ran"], 1)
        assert got == pytest.approx(2.0 / 3.0)

    def test_bigram_one_of_two(self):
        got = rouge_n(["a", "b", "c"], ["a", "b", "d"], 2)
        assert got == pytest.approx(0.5)

    def test_counts_are_clipped(self):
        # "a" appears once in the reference, so only one of three matches.
        got = rouge_n(["a", "a", "a"], ["a", "b"], 1)
        assert got == pytest.approx(0.4)

    def test_identical_sequences_score_one(self):
        assert rouge_n(["x", "y", "z"], ["x", "y", "z"], 2) == pytest.approx(1.0)

    def test_no_ngrams_of_requested_order_scores_zero(self):
        assert rouge_n(["a"], ["a", "b"], 2) == 0.0

    def test_order_zero_rejected(self):
        with pytest.raises(InvalidOrderError):
            rouge_n(["a"], ["a"], 0)

    def test_empty_sequence_rejected(self):
        with pytest.raises(EmptyTextError):
            rouge_n([], ["a"], 1)

    @given(token_lists, token_lists, st.integers(min_value=1, max_value=3))
    @settings(max_examples=200)
    def test_symmetric_and_bounded(self, a, b, n):
        left = rouge_n(a, b, n)
        right = rouge_n(b, a, n)
        assert left == pytest.approx(right)
        assert 0.0 <= left <= 1.0


class TestRougeL:
    def test_worked_example(self):
        got = rouge_l(["a", "b", "c", "d"], ["a", "c", "d"])
        assert got == pytest.approx(6.0 / 7.0)

    def test_disjoint_sequences_score_zero(self):
        assert rouge_l(["a", "b"], ["c", "d"]) == 0.0

    @given(token_lists, token_lists)
    @settings(max_examples=200)
    def test_symmetric_bounded_and_one_on_self(self, a, b):
        left = rouge_l(a, b)
        assert left == pytest.approx(rouge_l(b, a))
        assert 0.0 <= left <= 1.0
        assert rouge_l(a, a) == pytest.approx(1.0)


class TestSelectOracle:
    article = [
        tokenize("the dog ran."),
        tokenize("the cat sat on the mat."),
        tokenize("it purred."),
    ]

    def test_picks_highest_mean_rouge(self):
        alignment = select_oracle(tokenize("the cat sat."), self.article)
        assert alignment.oracle_idx == 1
        assert alignment.context_idx == 2
        assert not alignment.fallback_used

    def test_tie_goes_to_smallest_index(self):
        twice = [tokenize("a b c."), tokenize("a b c.")]
        alignment = select_oracle(tokenize("a b."), twice)
        assert alignment.oracle_idx == 0

    def test_last_sentence_oracle_uses_fallback(self):
        alignment = select_oracle(tokenize("it purred."), self.article)
        assert alignment.oracle_idx == 2
        assert alignment.context_idx is None
        assert alignment.fallback_used

    @given(
        st.lists(token_lists, min_size=1, max_size=5),
        token_lists,
    )
    @settings(max_examples=100)
    def test_matches_exhaustive_scan(self, sentences, summary):
        """The oracle index attains the maximum score at the smallest index."""
        alignment = select_oracle(summary, sentences)
        scores = [oracle_score(summary, s) for s in sentences]
        best = max(scores)
        assert scores[alignment.oracle_idx] == pytest.approx(best)
        assert all(s < best or i >= alignment.oracle_idx for i, s in enumerate(scores[: alignment.oracle_idx]))

    def test_context_tokens_falls_back_to_oracle(self):
        doc = make_document("d", ["only sentence here."], ["only sentence."])
        (alignment,) = align_document(doc)
        assert alignment.fallback_used
        assert context_tokens(doc, alignment) == list(doc.article[0].tokens)


class TestCorpusIO:
    def _write(self, tmp_path, lines):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_flat_strings_are_sentence_split(self, tmp_path):
        path = self._write(
            tmp_path,
            [json.dumps({"id": "d1", "article": "One here. Two here.", "summary": "One."})],
        )
        (doc,) = load_corpus(path)
        assert [s.raw for s in doc.article] == ["One here.", "Two here."]
        assert len(doc.summary) == 1

    def test_presplit_lists_taken_as_given(self, tmp_path):
        path = self._write(
            tmp_path,
            [json.dumps({"id": "d1", "article": ["a b", "c d"], "summary": ["a b"]})],
        )
        (doc,) = load_corpus(path)
        assert [s.raw for s in doc.article] == ["a b", "c d"]

    def test_lenient_mode_skips_bad_lines(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                json.dumps({"id": "d1", "article": "Fine here.", "summary": "Fine."}),
                json.dumps({"id": "d2", "article": "Missing the summary."}),
                json.dumps({"id": "d3", "article": "Also fine.", "summary": "Yes."}),
            ],
        )
        docs = load_corpus(path)
        assert [d.doc_id for d in docs] == ["d1", "d3"]

    def test_strict_mode_reports_line_number(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                json.dumps({"id": "d1", "article": "Fine here.", "summary": "Fine."}),
                json.dumps({"id": "d2", "article": "Missing the summary."}),
            ],
        )
        with pytest.raises(SchemaError) as err:
            load_corpus(path, strict=True)
        assert err.value.line == 2

    def test_duplicate_ids_rejected(self, tmp_path):
        record = json.dumps({"id": "dup", "article": "A b.", "summary": "A."})
        path = self._write(tmp_path, [record, record])
        with pytest.raises(SchemaError):
            load_corpus(path, strict=True)
        assert len(load_corpus(path)) == 1

    def test_missing_file_raises_io_error(self, tmp_path):
        with pytest.raises(CorpusIOError):
            load_corpus(tmp_path / "absent.jsonl")

    def test_round_trip_is_identity(self, tmp_path):
        path = self._write(
            tmp_path,
            [
                json.dumps({"id": "d1", "article": "One here. Two here.", "summary": "One."}),
                json.dumps({"id": "d2", "article": ["pre split", "as lists"], "summary": ["pre split"]}),
            ],
        )
        docs = load_corpus(path)
        out = tmp_path / "again.jsonl"
        save_corpus(docs, out)
        assert load_corpus(out) == docs

    def test_alignment_dump_fields(self, tmp_path):
        doc = make_document("d1", ["the cat sat.", "it purred."], ["the cat sat."])
        out = tmp_path / "alignments.jsonl"
        write_alignments([doc], out)
        record = json.loads(out.read_text(encoding="utf-8").splitlines()[0])
        assert record == {
            "id": "d1",
            "summary_idx": 0,
            "oracle_idx": 0,
            "context_idx": 1,
            "fallback_used": False,
        }


class TestLmSequences:
    doc = make_document("d", ["a b.", "c d."], ["a b."])

    def test_document_granularity_concatenates_articles(self):
        (stream,) = lm_sequences([self.doc])
        assert stream == ["a", "b", ".", "c", "d", "."]

    def test_sentence_granularity_keeps_sentences_apart(self):
        streams = lm_sequences([self.doc], granularity="sentence")
        assert streams == [["a", "b", "."], ["c", "d", "."]]

    def test_summaries_included_on_request(self):
        streams = lm_sequences([self.doc], include_summaries=True)
        assert streams == [["a", "b", ".", "c", "d", "."], ["a", "b", "."]]
