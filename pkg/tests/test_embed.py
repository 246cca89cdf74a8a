"""Embedding table parsing, cosine similarity, and neighbor lookup."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfnsum.embed import (
    EmbeddingTable,
    cosine,
    load_embeddings,
    save_embeddings,
    topk_similar,
)
from lfnsum.errors import (
    EmptyTableError,
    FormatError,
    OovQueryError,
    ZeroVectorError,
)


def write(tmp_path, text, name="vectors.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoading:
    def test_plain_file(self, tmp_path):
        path = write(tmp_path, "cat 1.0 0.0\ndog 0.0 1.0\n")
        table = load_embeddings(path)
        assert len(table) == 2 and table.dim == 2
        assert list(table.vector("cat")) == [1.0, 0.0]

    def test_count_dim_header_is_skipped(self, tmp_path):
        path = write(tmp_path, "2 3\ncat 1 0 0\ndog 0 1 0\n")
        table = load_embeddings(path)
        assert len(table) == 2 and table.dim == 3

    def test_two_field_vector_line_is_not_a_header(self, tmp_path):
        # A first line of word-plus-component must load as a vector.
        path = write(tmp_path, "cat 0.5\ndog 0.25\n")
        table = load_embeddings(path)
        assert table.vector("cat")[0] == 0.5

    def test_dimension_mismatch_reports_line(self, tmp_path):
        path = write(tmp_path, "cat 1 0\ndog 1 0 0\n")
        with pytest.raises(FormatError) as err:
            load_embeddings(path)
        assert err.value.line == 2

    def test_bad_component_reports_line(self, tmp_path):
        path = write(tmp_path, "cat 1 0\ndog x y\n")
        with pytest.raises(FormatError) as err:
            load_embeddings(path)
        assert err.value.line == 2

    def test_duplicate_word_last_wins(self, tmp_path):
        path = write(tmp_path, "cat 1 0\ncat 0 1\n")
        table = load_embeddings(path)
        assert list(table.vector("cat")) == [0.0, 1.0]

    def test_empty_file_rejected(self, tmp_path):
        path = write(tmp_path, "\n\n")
        with pytest.raises(EmptyTableError):
            load_embeddings(path)

    def test_round_trip(self, tmp_path):
        table = EmbeddingTable(["cat", "dog"], [[0.125, -1.5], [2.0, 0.0625]])
        out = tmp_path / "again.txt"
        save_embeddings(table, out)
        loaded = load_embeddings(out)
        for word in ("cat", "dog"):
            assert list(loaded.vector(word)) == list(table.vector(word))


class TestCosine:
    def test_parallel_vectors(self):
        assert cosine([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine([1.0, 0.0], [0.0, 3.0]) == pytest.approx(0.0)

    def test_opposed_vectors(self):
        assert cosine([1.0, 1.0], [-1.0, -1.0]) == pytest.approx(-1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVectorError):
            cosine([0.0, 0.0], [1.0, 0.0])

    @given(
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    )
    @settings(max_examples=200)
    def test_symmetric_and_bounded(self, u, v):
        if not (np.linalg.norm(u) and np.linalg.norm(v)):
            return
        left = cosine(u, v)
        assert left == pytest.approx(cosine(v, u))
        assert -1.0 - 1e-12 <= left <= 1.0 + 1e-12


class TestTopkSimilar:
    table = EmbeddingTable(
        ["q", "near", "far", "mid", "anti"],
        [
            [1.0, 0.0],
            [0.9, 0.1],
            [0.0, 1.0],
            [0.5, 0.5],
            [-1.0, 0.0],
        ],
    )

    def test_orders_by_descending_similarity(self):
        got = [w for w, _ in topk_similar("q", ["near", "far", "mid", "anti"], 4, self.table)]
        assert got == ["near", "mid", "far", "anti"]

    def test_query_word_is_excluded(self):
        got = [w for w, _ in topk_similar("q", ["q", "near"], 5, self.table)]
        assert got == ["near"]

    def test_unknown_candidates_are_skipped(self):
        got = [w for w, _ in topk_similar("q", ["near", "ghost"], 5, self.table)]
        assert got == ["near"]

    def test_k_truncates(self):
        got = topk_similar("q", ["near", "far", "mid", "anti"], 2, self.table)
        assert [w for w, _ in got] == ["near", "mid"]

    def test_ties_break_lexicographically(self):
        table = EmbeddingTable(
            ["q", "bb", "aa"], [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]
        )
        got = [w for w, _ in topk_similar("q", ["bb", "aa"], 2, table)]
        assert got == ["aa", "bb"]

    def test_oov_query_rejected(self):
        with pytest.raises(OovQueryError):
            topk_similar("ghost", ["near"], 1, self.table)

    def test_matches_brute_force_on_random_tables(self):
        """Exhaustive-scan equivalence on randomized tables and vocabularies."""
        rng = np.random.default_rng(42)
        for _ in range(25):
            n = int(rng.integers(3, 12))
            words = [f"w{i}" for i in range(n)]
            table = EmbeddingTable(words, rng.normal(size=(n, 4)))
            vocab = [w for w in words if rng.random() < 0.7]
            k = int(rng.integers(1, 5))
            got = topk_similar("w0", vocab, k, table)
            expect = sorted(
                (
                    (w, cosine(table.vector("w0"), table.vector(w)))
                    for w in set(vocab)
                    if w != "w0"
                ),
                key=lambda item: (-item[1], item[0]),
            )[:k]
            assert [w for w, _ in got] == [w for w, _ in expect]
            assert [s for _, s in got] == pytest.approx([s for _, s in expect])
