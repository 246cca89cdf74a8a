"""Command line interface.

Subcommands cover the pipeline end to end: ingest a corpus, train the
n-gram scorer, build negative samples, train the contrastive model, then
sweep and report.  ``selftest`` runs the whole chain on a generated
corpus as a smoke check.

Options may come from an INI file via ``--config``: a ``[common]``
section applies to every subcommand (unknown keys there are ignored),
and a section named after a subcommand applies to it alone (unknown keys
there are an error).  Command line flags always win.  Exit codes: 0 on
success, 1 on runtime failure, 2 on usage errors, 3 on a bad
configuration value, which is reported with its field name.

The LFN_LOG environment variable sets the logging level (e.g. DEBUG).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import shlex
import sys

from .contrast import ContrastiveSeq2Seq, grad_check
from .corpus import align_document, lm_sequences, load_corpus, write_alignments
from .embed import load_embeddings
from .errors import LfnsumError
from .evalx import (
    builder_failure_summary,
    margin_gaps,
    negative_quality,
    ratio_sweep,
    save_loss_curve,
    save_quality_report,
    save_sweep,
)
from .lfn import NegativeSampleBuilder, read_negatives, write_negatives
from .lm import NGramLanguageModel, spawn_external, train_ngram
from .synth import corpus_embeddings, planted_facts_corpus, training_pairs

log = logging.getLogger(__name__)


class ConfigError(Exception):
    """A configuration value that cannot be applied; carries the field."""

    def __init__(self, field, message):
        super().__init__(f"config field {field!r}: {message}")
        self.field = field


def _parse_bool(value):
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_ratios(text):
    return tuple(float(part) for part in text.split(",") if part.strip())


def _add_scorer_options(sub):
    sub.add_argument(
        "--scorer",
        choices=("native", "external"),
        default="native",
        help="score with the built-in n-gram model or an external process",
    )
    sub.add_argument("--lm", help="path of a saved n-gram model (native scorer)")
    sub.add_argument(
        "--scorer-cmd",
        help="command line of an external scorer process (external scorer)",
    )


# Path options stay optional at parse time so a config file can supply
# them; presence is enforced after config defaults are applied.
REQUIRED = {
    "ingest": ("input", "output"),
    "train-lm": ("input", "output"),
    "build-negatives": ("input", "embeddings", "output"),
    "train": ("input", "negatives", "output"),
    "sweep": ("input", "embeddings", "model", "output"),
    "report": ("input", "negatives", "output"),
    "selftest": (),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lfnsum",
        description="Factual negative construction and contrastive training.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    registry = {}

    def sub(name, **kwargs):
        child = subparsers.add_parser(name, **kwargs)
        child.add_argument("--config", help="INI file with option defaults")
        registry[name] = child
        return child

    ingest = sub("ingest", help="validate a corpus and write its alignments")
    ingest.add_argument("--input", help="corpus JSONL path")
    ingest.add_argument("--output", help="alignments JSONL path")
    ingest.add_argument(
        "--strict", action="store_true", help="reject malformed lines instead of skipping"
    )

    train_lm = sub("train-lm", help="fit the n-gram scorer on a corpus")
    train_lm.add_argument("--input", help="corpus JSONL path")
    train_lm.add_argument("--output", help="model JSON path")
    train_lm.add_argument("--order", type=int, default=3)
    train_lm.add_argument("--smoothing-k", type=float, default=0.01)
    train_lm.add_argument(
        "--granularity", choices=("document", "sentence"), default="document"
    )
    train_lm.add_argument("--include-summaries", action="store_true")

    build = sub("build-negatives", help="construct negative samples")
    build.add_argument("--input", help="corpus JSONL path")
    build.add_argument("--embeddings", help="embedding text file")
    build.add_argument("--output", help="negatives JSONL path")
    _add_scorer_options(build)
    build.add_argument("--ratio", type=float, default=0.15)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--workers", type=int, default=1)
    build.add_argument("--epoch", type=int, default=0)
    build.add_argument("--dynamic", action="store_true")
    build.add_argument("--max-rounds", type=int, default=3)
    build.add_argument("--max-span", type=int, default=3)
    build.add_argument("--rank-topk", type=int, default=10)
    build.add_argument("--replace-topk", type=int, default=5)

    train = sub("train", help="train the contrastive model")
    train.add_argument("--input", help="corpus JSONL path")
    train.add_argument("--negatives", help="negatives JSONL path")
    train.add_argument("--output", help="model JSON path")
    train.add_argument("--loss-curve", help="optional per-step loss CSV path")
    train.add_argument("--embed-dim", type=int, default=32)
    train.add_argument("--steps", type=int, default=200)
    train.add_argument("--learning-rate", type=float, default=0.1)
    train.add_argument("--temperature", type=float, default=0.1)
    train.add_argument("--margin", type=float, default=1.0)
    train.add_argument("--encoder-weight", type=float, default=1.0)
    train.add_argument("--decoder-weight", type=float, default=1.0)
    train.add_argument("--decoder-mode", choices=("masked", "all"), default="masked")
    train.add_argument(
        "--denominator-mode", choices=("standard", "literal"), default="standard"
    )
    train.add_argument("--seed", type=int, default=0)

    sweep = sub("sweep", help="score corruption ratios with a trained model")
    sweep.add_argument("--input", help="corpus JSONL path")
    sweep.add_argument("--embeddings", help="embedding text file")
    sweep.add_argument("--model", help="trained model JSON path")
    sweep.add_argument("--output", help="sweep CSV path")
    _add_scorer_options(sweep)
    sweep.add_argument("--ratios", type=_parse_ratios, default=(0.0, 0.25, 0.5, 0.75, 1.0))
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--rank-topk", type=int, default=10)

    report = sub("report", help="evaluate negatives against a scorer")
    report.add_argument("--input", help="corpus JSONL path")
    report.add_argument("--negatives", help="negatives JSONL path")
    report.add_argument("--output", help="report JSON path")
    _add_scorer_options(report)

    selftest = sub("selftest", help="run the whole pipeline on generated data")
    selftest.add_argument("--seed", type=int, default=0)

    return parser, registry


def _coerce(sub, dest, value, field):
    for action in sub._actions:
        if action.dest != dest:
            continue
        try:
            if action.nargs == 0 and isinstance(action.const, bool):
                return _parse_bool(value)
            if action.choices and value not in action.choices:
                raise ValueError(f"must be one of {', '.join(map(str, action.choices))}")
            if action.type is not None:
                return action.type(value)
            return value
        except (TypeError, ValueError) as exc:
            raise ConfigError(field, str(exc)) from exc
    raise ConfigError(field, "unknown field")


def _apply_config(path, command, registry):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError("config", f"cannot read {path!r}")
    sub = registry[command]
    dests = {action.dest for action in sub._actions}
    defaults = {}
    if parser.has_section("common"):
        for key, value in parser.items("common"):
            dest = key.replace("-", "_")
            if dest in dests:
                defaults[dest] = _coerce(sub, dest, value, key)
    if parser.has_section(command):
        for key, value in parser.items(command):
            dest = key.replace("-", "_")
            if dest not in dests:
                raise ConfigError(key, "unknown field")
            defaults[dest] = _coerce(sub, dest, value, key)
    sub.set_defaults(**defaults)


def parse_args(argv):
    parser, registry = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(args.config, args.command, registry)
        args = parser.parse_args(argv)
    missing = [dest for dest in REQUIRED[args.command] if getattr(args, dest) is None]
    if missing:
        flags = ", ".join("--" + dest.replace("_", "-") for dest in missing)
        registry[args.command].error(f"the following arguments are required: {flags}")
    return args


def _scorer_spec(args):
    """Returns an argv list for external scoring or a loaded native model."""
    if args.scorer == "external":
        if not args.scorer_cmd:
            raise ConfigError("scorer-cmd", "required when scorer is external")
        return shlex.split(args.scorer_cmd)
    if not args.lm:
        raise ConfigError("lm", "required when scorer is native")
    return NGramLanguageModel.load(args.lm)


def _open_scorer(args):
    """A live scoring handle plus a close callback."""
    spec = _scorer_spec(args)
    if isinstance(spec, list):
        scorer = spawn_external(spec)
        return scorer, scorer.close
    return spec, lambda: None


def cmd_ingest(args):
    docs = load_corpus(args.input, strict=args.strict)
    write_alignments(docs, args.output)
    alignments = [a for doc in docs for a in align_document(doc)]
    print(f"documents: {len(docs)}")
    print(f"summary sentences: {len(alignments)}")
    print(f"context fallbacks: {sum(1 for a in alignments if a.fallback_used)}")
    return 0


def cmd_train_lm(args):
    docs = load_corpus(args.input)
    sequences = lm_sequences(
        docs, granularity=args.granularity, include_summaries=args.include_summaries
    )
    model = train_ngram(sequences, order=args.order, k=args.smoothing_k)
    model.save(args.output)
    print(f"vocabulary: {len(model.vocab_)}")
    print(f"model: {args.output}")
    return 0


def cmd_build_negatives(args):
    docs = load_corpus(args.input)
    table = load_embeddings(args.embeddings)
    builder = NegativeSampleBuilder(
        scorer=_scorer_spec(args),
        embeddings=table,
        max_rounds=args.max_rounds,
        max_span=args.max_span,
        rank_topk=args.rank_topk,
        replace_topk=args.replace_topk,
        replacement_ratio=args.ratio,
        seed=args.seed,
        dynamic=args.dynamic,
        epoch=args.epoch,
        workers=args.workers,
    )
    samples = builder.transform(docs)
    write_negatives(samples, args.output)
    print(f"negatives: {len(samples)}")
    for reason, count in sorted(builder_failure_summary(builder).items()):
        print(f"skipped ({reason}): {count}")
    return 0


def cmd_train(args):
    docs = load_corpus(args.input)
    samples = read_negatives(args.negatives)
    pairs = training_pairs(docs, samples)
    model = ContrastiveSeq2Seq(
        embed_dim=args.embed_dim,
        temperature=args.temperature,
        margin=args.margin,
        encoder_loss_weight=args.encoder_weight,
        decoder_loss_weight=args.decoder_weight,
        decoder_mode=args.decoder_mode,
        denominator_mode=args.denominator_mode,
        learning_rate=args.learning_rate,
        steps=args.steps,
        seed=args.seed,
    ).fit(pairs)
    model.save(args.output)
    if args.loss_curve:
        save_loss_curve(model, args.loss_curve)
    final = model.loss_curve_[-1]
    print(f"pairs: {len(pairs)}")
    print(f"final loss: {final.total:.6f}")
    if model.diverged_:
        print("warning: training diverged and was rolled back")
    return 0


def cmd_sweep(args):
    docs = load_corpus(args.input)
    table = load_embeddings(args.embeddings)
    model = ContrastiveSeq2Seq.load(args.model)
    builder = NegativeSampleBuilder(
        scorer=_scorer_spec(args),
        embeddings=table,
        rank_topk=args.rank_topk,
        seed=args.seed,
    )
    result = ratio_sweep(docs, builder, model, ratios=args.ratios)
    save_sweep(result, args.output)
    for ratio, score in zip(result.ratios, result.scores):
        print(f"ratio {ratio:.2f}: mean score {score:.4f}")
    print(f"spearman: {result.spearman:.4f}")
    return 0


def cmd_report(args):
    docs = load_corpus(args.input)
    samples = read_negatives(args.negatives)
    scorer, close = _open_scorer(args)
    try:
        report = negative_quality(docs, samples, scorer)
    finally:
        close()
    save_quality_report(report, args.output)
    print(f"samples: {report.total}")
    print(f"strictly lower: {report.n_lower}")
    print(f"tied: {report.n_tied}")
    print(f"fraction: {report.fraction:.4f}")
    return 0


def cmd_selftest(args):
    failures = []

    def check(name, ok, detail=""):
        status = "ok" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{name}: {status}{suffix}")
        if not ok:
            failures.append(name)

    docs = planted_facts_corpus(n_docs=10, seed=args.seed)
    table = corpus_embeddings(docs, dim=8, seed=args.seed)
    scorer = train_ngram(lm_sequences(docs), order=3, k=0.01)
    builder = NegativeSampleBuilder(
        scorer=scorer, embeddings=table, rank_topk=50, seed=args.seed
    )
    samples = builder.transform(docs)
    check("construction", len(samples) == len(docs), f"{len(samples)}/{len(docs)}")

    report = negative_quality(docs, samples, scorer)
    check("negative quality", report.fraction >= 0.7, f"fraction {report.fraction:.2f}")

    pairs = training_pairs(docs, samples)
    model = ContrastiveSeq2Seq(
        embed_dim=16, steps=30, learning_rate=0.5, margin=2.0, seed=args.seed
    ).fit(pairs)
    check("training", not model.diverged_ and len(model.loss_curve_) == 30)

    err = grad_check(model, pairs[:2], n_entries=4, seed=args.seed)
    check("gradients", err <= 1e-4, f"max relative error {err:.2e}")

    gaps = margin_gaps(model, pairs)
    check("margins", len(gaps) == len(pairs))
    return 1 if failures else 0


COMMANDS = {
    "ingest": cmd_ingest,
    "train-lm": cmd_train_lm,
    "build-negatives": cmd_build_negatives,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "selftest": cmd_selftest,
}


def main(argv=None):
    level = os.environ.get("LFN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LfnsumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
