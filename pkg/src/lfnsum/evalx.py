"""Evaluation of constructed negatives and trained models.

Three instruments:

* ``negative_quality`` asks a language model whether each negative makes
  the aligned article context less probable than the gold sentence does.
  A good factual negative should, so the strict-lower fraction is the
  headline number (ties count half).
* ``ratio_sweep`` corrupts summaries at increasing replacement ratios and
  scores them against their articles with a trained model; the rank
  correlation between ratio and score should be strongly negative.
* ``margin_gaps`` measures, per held-out pair, how much likelihood a
  model assigns the gold over the negative at the replaced positions,
  which is the quantity the decoder contrast trains.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

from scipy.stats import spearmanr

from .corpus import align_document, context_tokens
from .errors import EmptyReportError

HISTOGRAM_BIN = 0.05


def histogram_bin(gap, width=HISTOGRAM_BIN):
    """Label of the histogram bucket containing ``gap``."""
    lo = math.floor(gap / width) * width
    return f"{lo:.2f}"


@dataclass(frozen=True)
class NegativeQualityReport:
    """How often negatives made the article context less probable."""

    total: int
    n_lower: int
    n_tied: int
    fraction: float
    gap_histogram: dict
    failure_counts: dict

    def to_dict(self):
        return asdict(self)


def _contexts_by_key(docs):
    contexts = {}
    for doc in docs:
        for alignment in align_document(doc):
            contexts[(doc.doc_id, alignment.summary_idx)] = context_tokens(
                doc, alignment
            )
    return contexts


def negative_quality(docs, samples, scorer, diagnostics=()):
    """Score each negative against its gold under an article context.

    For every sample the context sentence is scored conditioned on the
    gold and on the negative; the gap is gold-conditioned minus
    negative-conditioned, so positive gaps mean the corruption hurt.
    """
    samples = list(samples)
    if not samples:
        raise EmptyReportError("no negative samples to evaluate")
    contexts = _contexts_by_key(docs)
    n_lower = 0
    n_tied = 0
    histogram = {}
    for sample in samples:
        key = (sample.doc_id, sample.sentence_idx)
        if key not in contexts:
            raise ValueError(f"sample references unknown sentence {key!r}")
        context = contexts[key]
        gold_side = scorer.conditional_logprob(context, sample.gold_tokens)
        neg_side = scorer.conditional_logprob(context, sample.tokens)
        gap = gold_side - neg_side
        if neg_side < gold_side:
            n_lower += 1
        elif neg_side == gold_side:
            n_tied += 1
        label = histogram_bin(gap)
        histogram[label] = histogram.get(label, 0) + 1
    failure_counts = {}
    for diagnostic in diagnostics:
        failure_counts[diagnostic.reason] = failure_counts.get(diagnostic.reason, 0) + 1
    total = len(samples)
    return NegativeQualityReport(
        total=total,
        n_lower=n_lower,
        n_tied=n_tied,
        fraction=(n_lower + 0.5 * n_tied) / total,
        gap_histogram=dict(sorted(histogram.items(), key=lambda kv: float(kv[0]))),
        failure_counts=failure_counts,
    )


@dataclass(frozen=True)
class SweepResult:
    """Mean consistency score per replacement ratio."""

    ratios: tuple
    scores: tuple
    spearman: float

    def to_rows(self):
        return [
            {"ratio": ratio, "mean_score": score}
            for ratio, score in zip(self.ratios, self.scores)
        ]


def _article_tokens(doc):
    return tuple(tok for sentence in doc.article for tok in sentence.tokens)


def ratio_sweep(docs, builder, model, ratios=(0.0, 0.25, 0.5, 0.75, 1.0)):
    """Mean model consistency score of corrupted summaries per ratio.

    Ratio zero scores the untouched gold sentences.  The builder's own
    replacement ratio is set for each pass and restored afterwards, so
    the same fitted scorer and embeddings are reused throughout.
    """
    docs = list(docs)
    if not docs:
        raise EmptyReportError("no documents to sweep")
    articles = {doc.doc_id: _article_tokens(doc) for doc in docs}
    golds = {
        (doc.doc_id, idx): tuple(sentence.tokens)
        for doc in docs
        for idx, sentence in enumerate(doc.summary)
    }
    original_ratio = builder.get_params()["replacement_ratio"]
    scores = []
    try:
        for ratio in ratios:
            if ratio == 0.0:
                values = [
                    model.fact_score(articles[doc_id], gold)
                    for (doc_id, _), gold in sorted(golds.items())
                ]
            else:
                builder.set_params(replacement_ratio=ratio)
                samples = builder.transform(docs)
                if not samples:
                    raise EmptyReportError(f"no negatives built at ratio {ratio}")
                values = [
                    model.fact_score(articles[s.doc_id], s.tokens) for s in samples
                ]
            scores.append(sum(values) / len(values))
    finally:
        builder.set_params(replacement_ratio=original_ratio)
    rho = spearmanr(list(ratios), scores).correlation
    return SweepResult(ratios=tuple(ratios), scores=tuple(scores), spearman=float(rho))


def margin_gaps(model, pairs):
    """Gold-minus-negative likelihood gap at replaced positions, per pair.

    Pairs without negatives are skipped.  The gap averages over each
    pair's negatives and each negative's replaced positions.
    """
    gaps = []
    for pair in pairs:
        if not pair.negatives:
            continue
        gold_logps = model.token_logprobs(pair.article, pair.gold)
        per_negative = []
        for neg, mask in zip(pair.negatives, pair.replaced_positions):
            neg_logps = model.token_logprobs(pair.article, neg)
            idx = sorted(set(mask))
            per_negative.append(
                sum(gold_logps[i] - neg_logps[i] for i in idx) / len(idx)
            )
        gaps.append(sum(per_negative) / len(per_negative))
    if not gaps:
        raise EmptyReportError("no pairs with negatives to evaluate")
    return gaps


def win_fraction(gaps_a, gaps_b):
    """Fraction of items where the first model's gap beats the second's."""
    gaps_a = list(gaps_a)
    gaps_b = list(gaps_b)
    if len(gaps_a) != len(gaps_b) or not gaps_a:
        raise EmptyReportError("gap lists must be non-empty and aligned")
    wins = sum(1 for a, b in zip(gaps_a, gaps_b) if a > b)
    return wins / len(gaps_a)


def save_quality_report(report, path):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")


def save_sweep(result, path):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=["ratio", "mean_score"])
        writer.writeheader()
        writer.writerows(result.to_rows())


def save_loss_curve(model, path):
    """Write a fitted model's per-step loss components as CSV."""
    curve = getattr(model, "loss_curve_", None)
    if not curve:
        raise EmptyReportError("model has no recorded loss curve")
    margins = list(getattr(model, "margin_history_", []))
    aligned = len(margins) == len(curve)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "ce", "encoder", "decoder", "total", "margin_gap"])
        for step, breakdown in enumerate(curve):
            margin = f"{margins[step]:.10g}" if aligned else ""
            writer.writerow(
                [
                    step,
                    f"{breakdown.ce:.10g}",
                    f"{breakdown.encoder:.10g}",
                    f"{breakdown.decoder:.10g}",
                    f"{breakdown.total:.10g}",
                    margin,
                ]
            )


def builder_failure_summary(builder):
    """Reason counts from a builder's last transform."""
    counts = {}
    for diagnostic in getattr(builder, "diagnostics_", []):
        counts[diagnostic.reason] = counts.get(diagnostic.reason, 0) + 1
    return counts
