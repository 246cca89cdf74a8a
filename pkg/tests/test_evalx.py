"""Tests for negative-quality and model evaluation."""

import csv
import json
import math

import pytest

from lfnsum.contrast import ContrastiveSeq2Seq, TrainingPair
from lfnsum.corpus import lm_sequences
from lfnsum.errors import EmptyReportError
from lfnsum.evalx import (
    builder_failure_summary,
    histogram_bin,
    margin_gaps,
    negative_quality,
    ratio_sweep,
    save_loss_curve,
    save_quality_report,
    save_sweep,
    win_fraction,
)
from lfnsum.lfn import NegativeSampleBuilder
from lfnsum.lm import train_ngram
from lfnsum.synth import (
    corpus_embeddings,
    planted_facts_corpus,
    training_pairs,
)


@pytest.fixture(scope="module")
def pipeline():
    docs = planted_facts_corpus(n_docs=15, seed=21)
    table = corpus_embeddings(docs, dim=8, seed=21)
    scorer = train_ngram(lm_sequences(docs), order=3, k=0.01)
    builder = NegativeSampleBuilder(
        scorer=scorer, embeddings=table, rank_topk=50, seed=2
    )
    samples = builder.transform(docs)
    return docs, table, scorer, builder, samples


class TestHistogramBin:
    @pytest.mark.parametrize(
        "gap,label",
        [(0.0, "0.00"), (0.07, "0.05"), (0.05, "0.05"), (-0.01, "-0.05"), (1.23, "1.20")],
    )
    def test_floor_labels(self, gap, label):
        assert histogram_bin(gap) == label


class FlatScorer:
    def conditional_logprob(self, target, condition):
        return -3.0


class TestNegativeQuality:
    def test_planted_negatives_hurt_the_context(self, pipeline):
        docs, _, scorer, _, samples = pipeline
        report = negative_quality(docs, samples, scorer)
        assert report.total == len(samples)
        assert report.fraction >= 0.8
        assert report.n_lower + report.n_tied <= report.total
        assert sum(report.gap_histogram.values()) == report.total
        assert report.failure_counts == {}

    def test_indifferent_scorer_scores_half(self, pipeline):
        docs, _, _, _, samples = pipeline
        report = negative_quality(docs, samples, FlatScorer())
        assert report.n_tied == report.total
        assert report.fraction == pytest.approx(0.5)
        assert set(report.gap_histogram) == {"0.00"}

    def test_diagnostics_are_tallied(self, pipeline):
        docs, _, scorer, _, samples = pipeline
        from lfnsum.lfn import Diagnostic

        diags = [
            Diagnostic("d", 0, reason="too_short"),
            Diagnostic("e", 0, reason="too_short"),
            Diagnostic("f", 0, reason="construction_failed"),
        ]
        report = negative_quality(docs, samples, scorer, diagnostics=diags)
        assert report.failure_counts == {"too_short": 2, "construction_failed": 1}

    def test_no_samples_rejected(self, pipeline):
        docs, _, scorer, _, _ = pipeline
        with pytest.raises(EmptyReportError):
            negative_quality(docs, [], scorer)

    def test_unknown_document_rejected(self, pipeline):
        docs, _, scorer, _, samples = pipeline
        orphan = samples[0].__class__(**{**samples[0].__dict__, "doc_id": "ghost"})
        with pytest.raises(ValueError):
            negative_quality(docs, [orphan], scorer)

    def test_report_round_trips_as_json(self, pipeline, tmp_path):
        docs, _, scorer, _, samples = pipeline
        report = negative_quality(docs, samples, scorer)
        path = tmp_path / "report.json"
        save_quality_report(report, path)
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["total"] == report.total
        assert data["fraction"] == report.fraction


@pytest.fixture(scope="module")
def trained(pipeline):
    docs, _, _, _, samples = pipeline
    pairs = training_pairs(docs, samples)
    model = ContrastiveSeq2Seq(
        embed_dim=16, steps=40, learning_rate=0.5, seed=0, margin=2.0
    ).fit(pairs)
    return pairs, model


class TestMarginGaps:
    def test_one_gap_per_paired_item(self, trained):
        pairs, model = trained
        gaps = margin_gaps(model, pairs)
        assert len(gaps) == len([p for p in pairs if p.negatives])
        assert all(math.isfinite(g) for g in gaps)

    def test_pairs_without_negatives_rejected(self, trained):
        _, model = trained
        bare = [TrainingPair(article=("alice",), gold=("alice",))]
        with pytest.raises(EmptyReportError):
            margin_gaps(model, bare)

    def test_win_fraction_counts_strict_wins(self):
        assert win_fraction([2.0, 3.0, 1.0], [1.0, 4.0, 0.5]) == pytest.approx(2 / 3)
        with pytest.raises(EmptyReportError):
            win_fraction([], [])
        with pytest.raises(EmptyReportError):
            win_fraction([1.0], [1.0, 2.0])


class TestRatioSweep:
    def test_sweep_shape_and_restoration(self, pipeline, trained):
        docs, _, _, builder, _ = pipeline
        _, model = trained
        before = builder.get_params()["replacement_ratio"]
        result = ratio_sweep(docs, builder, model, ratios=(0.0, 0.5, 1.0))
        assert result.ratios == (0.0, 0.5, 1.0)
        assert len(result.scores) == 3
        assert -1.0 <= result.spearman <= 1.0
        assert builder.get_params()["replacement_ratio"] == before

    def test_ratio_zero_scores_the_gold(self, pipeline, trained):
        docs, _, _, builder, _ = pipeline
        _, model = trained
        result = ratio_sweep(docs, builder, model, ratios=(0.0,))
        manual = [
            model.fact_score(
                tuple(t for s in doc.article for t in s.tokens),
                tuple(doc.summary[0].tokens),
            )
            for doc in docs
        ]
        assert result.scores[0] == pytest.approx(sum(manual) / len(manual))

    def test_empty_documents_rejected(self, pipeline, trained):
        _, _, _, builder, _ = pipeline
        _, model = trained
        with pytest.raises(EmptyReportError):
            ratio_sweep([], builder, model)

    def test_sweep_saves_as_csv(self, pipeline, trained, tmp_path):
        docs, _, _, builder, _ = pipeline
        _, model = trained
        result = ratio_sweep(docs, builder, model, ratios=(0.0, 1.0))
        path = tmp_path / "sweep.csv"
        save_sweep(result, path)
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert [float(r["ratio"]) for r in rows] == [0.0, 1.0]
        assert float(rows[0]["mean_score"]) == pytest.approx(result.scores[0])


class TestLossCurveCsv:
    def test_curve_with_margins(self, trained, tmp_path):
        _, model = trained
        path = tmp_path / "curve.csv"
        save_loss_curve(model, path)
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == len(model.loss_curve_)
        assert float(rows[0]["total"]) == pytest.approx(model.loss_curve_[0].total)
        assert rows[0]["margin_gap"] != ""

    def test_unfitted_model_rejected(self, tmp_path):
        with pytest.raises(EmptyReportError):
            save_loss_curve(ContrastiveSeq2Seq(), tmp_path / "never.csv")


class TestBuilderFailureSummary:
    def test_counts_reasons(self, pipeline):
        _, _, _, builder, _ = pipeline
        assert builder_failure_summary(builder) == {}
