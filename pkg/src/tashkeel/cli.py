"""Command-line entry point for the whole pipeline.

Exit codes: 0 success, 2 usage error, 3 data error (malformed input, file
format, mismatched corpora), 4 numeric failure during training. All text
input and output is UTF-8 without a byte-order mark.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis, metrics, models, tod
from .codec import DiacriticError, build_vocabulary, remove_diacritics
from .corpus import Corpus, corpus_stats, preprocess
from .metrics import ALL_VARIANTS, EvalOptions
from .models import NumericError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _read_corpus(path: str, provenance: str = "corpus") -> Corpus:
    if not Path(path).exists():
        raise FileNotFoundError(f"no such file: {path}")
    return Corpus.from_file(path, provenance)


def _write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in lines:
            fh.write(line + "\n")


def cmd_preprocess(args) -> int:
    corpus = _read_corpus(args.infile)
    cleaned = preprocess(
        corpus,
        split_punct=args.split_punct,
        max_len=args.max_len,
        min_rate=args.min_rate,
    )
    _write_lines(args.outfile, cleaned.lines)
    print(f"wrote {len(cleaned.lines)} lines to {args.outfile}")
    return EXIT_OK


def cmd_stats(args) -> int:
    report = corpus_stats(_read_corpus(args.infile))
    for key, value in report.as_records():
        print(f"{key}={value}")
    return EXIT_OK


def cmd_train(args) -> int:
    train_corpus = _read_corpus(args.train, "train")
    valid_corpus = _read_corpus(args.valid, "valid")
    overrides = {}
    if args.crf:
        overrides["output_head"] = "crf"
    if args.bng:
        overrides["bng"] = True
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch is not None:
        overrides["batch_size"] = args.batch
    if args.avg_k is not None:
        overrides["avg_window"] = args.avg_k
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.hidden is not None:
        overrides["rnn_hidden"] = args.hidden
    if args.dense is not None:
        overrides["dense_sizes"] = tuple(int(n) for n in args.dense.split(","))
    config = models.default_config(args.family, **overrides)
    if args.crf and args.family != models.RNN_FAMILY:
        raise ValueError("--crf only applies to the rnn family")
    with_marks = args.family == models.RNN_FAMILY
    vocab = build_vocabulary(train_corpus.lines, with_sentence_marks=with_marks)
    model = models.build_model(config, vocab, seed=args.seed)
    result = models.train_model(model, train_corpus, valid_corpus, seed=args.seed)
    models.finalize_model(model, result, k=config.avg_window)
    models.save_model(model, args.out)
    log_path = args.log if args.log else args.out + ".log"
    result.write_log(log_path)
    last = result.log[-1] if result.log else None
    if last is not None:
        print(
            f"trained {args.family} for {config.epochs} epochs: "
            f"loss {last.train_loss:.4f} acc {last.train_accuracy:.4f}"
        )
    print(f"model saved to {args.out}; log at {log_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = models.load_model(args.model)
    corpus = _read_corpus(args.infile)
    _write_lines(args.outfile, models.predict_lines(model, corpus.lines))
    print(f"diacritized {len(corpus.lines)} lines to {args.outfile}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gold = _read_corpus(args.gold, "gold")
    pred = _read_corpus(args.pred, "pred")
    if len(gold.lines) != len(pred.lines):
        raise ValueError(
            f"gold has {len(gold.lines)} lines but prediction has {len(pred.lines)}"
        )
    gold_lines = gold.decode()
    pred_lines = pred.decode()
    if args.no_case_ending or args.no_include_nodiac:
        variants = [EvalOptions(not args.no_case_ending, not args.no_include_nodiac)]
    else:
        variants = list(ALL_VARIANTS)
    for opts in variants:
        report = metrics.score_corpus(gold_lines, pred_lines, opts)
        print(report.as_record())
    if args.confusion:
        matrix = metrics.confusion_corpus(gold_lines, pred_lines, variants[0])
        with open(args.confusion, "w", encoding="utf-8", newline="") as fh:
            matrix.write_csv(fh)
        print(f"confusion matrix written to {args.confusion}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    if args.what == "census":
        corpora = {Path(p).stem: _read_corpus(p, Path(p).stem) for p in args.infiles}
        census = analysis.class_census(corpora)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                census.write_csv(fh)
            print(f"census written to {args.out}")
        else:
            census.write_csv(sys.stdout)
        return EXIT_OK
    if args.what == "rank":
        gold = _read_corpus(args.gold, "gold")
        pred = _read_corpus(args.pred, "pred")
        ranked = analysis.rank_lines(
            gold.decode(), pred.decode(),
            gold_text=gold.lines, pred_text=pred.lines,
        )
        total = analysis.ranked_aggregate(ranked)
        print(total.as_record())
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                analysis.write_ranking_csv(ranked, fh)
            print(f"ranking written to {args.out}")
        return EXIT_OK
    model = models.load_model(args.model)
    rows = analysis.export_embeddings(model)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        analysis.write_embeddings_tsv(rows, fh)
    print(f"exported {len(rows)} embedding rows to {args.out}")
    return EXIT_OK


def cmd_tod(args) -> int:
    if args.what == "learn":
        corpus = _read_corpus(args.infile)
        model = tod.bpe_learn((remove_diacritics(l) for l in corpus.lines), args.merges)
        model.save(args.out)
        print(f"learned {len(model.merges)} merges to {args.out}")
        return EXIT_OK
    model = tod.BpeModel.load(args.model)
    if args.what == "apply":
        corpus = _read_corpus(args.infile)
        _write_lines(
            args.out,
            (" ".join(tod.bpe_apply(model, remove_diacritics(l))) for l in corpus.lines),
        )
        print(f"segmented {len(corpus.lines)} lines to {args.out}")
        return EXIT_OK
    if args.what == "align":
        corpus = _read_corpus(args.infile)
        alignments = [tod.align_diacritics(line, model) for line in corpus.lines]
        _write_lines(args.out_prefix + ".subwords", (" ".join(a.subwords) for a in alignments))
        _write_lines(args.out_prefix + ".forms", (" ".join(a.diacritic_forms) for a in alignments))
        _write_lines(args.out_prefix + ".merged", (" ".join(a.merged) for a in alignments))
        print(f"aligned {len(alignments)} lines to {args.out_prefix}.{{subwords,forms,merged}}")
        return EXIT_OK
    corpus = _read_corpus(args.infile)
    census = tod.vocab_census(corpus, model)
    for key, value in census.as_records():
        print(f"{key}={value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tashkeel",
        description="Arabic diacritization: preprocessing, training, prediction, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and split a corpus file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--split-punct", action="store_true")
    p.add_argument("--max-len", type=int, default=500)
    p.add_argument("--min-rate", type=float, default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--family", required=True,
                   choices=[*models.FFNN_FAMILIES, models.RNN_FAMILY])
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--crf", action="store_true")
    p.add_argument("--bng", action="store_true")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--avg-k", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None, help="recurrent hidden units")
    p.add_argument("--dense", default=None, help="comma-separated dense layer sizes")
    p.add_argument("--log", default=None, help="training log path (default: OUT.log)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="diacritize a file")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--no-case-ending", action="store_true")
    p.add_argument("--no-include-nodiac", action="store_true")
    p.add_argument("--confusion", default=None, help="write confusion matrix CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="census, ranking and embedding export")
    asub = p.add_subparsers(dest="what", required=True)
    a = asub.add_parser("census")
    a.add_argument("infiles", nargs="+")
    a.add_argument("--out", default=None)
    a = asub.add_parser("rank")
    a.add_argument("--gold", required=True)
    a.add_argument("--pred", required=True)
    a.add_argument("--out", default=None)
    a = asub.add_parser("embeddings")
    a.add_argument("--model", required=True)
    a.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("tod", help="subword segmentation and diacritic streams")
    tsub = p.add_subparsers(dest="what", required=True)
    t = tsub.add_parser("learn")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--merges", type=int, required=True)
    t.add_argument("--out", required=True)
    t = tsub.add_parser("apply")
    t.add_argument("--model", required=True)
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out", required=True)
    t = tsub.add_parser("align")
    t.add_argument("--model", required=True)
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out-prefix", required=True)
    t = tsub.add_parser("census")
    t.add_argument("--model", required=True)
    t.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_tod)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DiacriticError, metrics.BaseMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
