"""Diacritic and word error rates under the four counting variants.

DER is the percentage of scored Arabic letters whose predicted class differs
from gold; WER is the percentage of Arabic words containing at least one such
error. The two option bits select whether word-final letters (case endings)
and letters with no gold diacritic are scored, giving four variants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .codec import DiacriticClass, LabeledText, is_arabic_letter

NUM_CLASSES = 15


class BaseMismatchError(ValueError):
    """Gold and prediction disagree on the undiacritized text."""

    def __init__(self, offset: int, gold_ch: str, pred_ch: str):
        super().__init__(
            f"base text mismatch at offset {offset}: gold {gold_ch!r} vs predicted {pred_ch!r}"
        )
        self.offset = offset


class MixedOptionsError(ValueError):
    """Reports with different counting options cannot be aggregated."""


@dataclass(frozen=True)
class EvalOptions:
    count_case_ending: bool = True
    count_no_diacritic: bool = True

    def label(self) -> str:
        ce = "w/ case ending" if self.count_case_ending else "w/o case ending"
        nd = "incl. no-diacritic" if self.count_no_diacritic else "excl. no-diacritic"
        return f"{ce}, {nd}"


ALL_VARIANTS = (
    EvalOptions(True, True),
    EvalOptions(False, True),
    EvalOptions(True, False),
    EvalOptions(False, False),
)


@dataclass
class EvalReport:
    options: EvalOptions
    counted_chars: int = 0
    error_chars: int = 0
    counted_words: int = 0
    error_words: int = 0

    @property
    def der(self) -> float:
        return 100.0 * self.error_chars / self.counted_chars if self.counted_chars else 0.0

    @property
    def wer(self) -> float:
        return 100.0 * self.error_words / self.counted_words if self.counted_words else 0.0

    def as_record(self) -> str:
        return (
            f"case_ending={'true' if self.options.count_case_ending else 'false'} "
            f"no_diacritic={'true' if self.options.count_no_diacritic else 'false'} "
            f"der={self.der:.4f} wer={self.wer:.4f} "
            f"chars={self.counted_chars} char_errors={self.error_chars} "
            f"words={self.counted_words} word_errors={self.error_words}"
        )


def arabic_word_spans(base: str) -> list[tuple[int, int]]:
    """Half-open index spans of whitespace tokens containing an Arabic letter."""
    spans = []
    start = None
    for i, ch in enumerate(base + " "):
        if i < len(base) and not ch.isspace():
            if start is None:
                start = i
        elif start is not None:
            if any(is_arabic_letter(c) for c in base[start:i]):
                spans.append((start, i))
            start = None
    return spans


def _check_bases(gold: LabeledText, pred: LabeledText) -> None:
    if gold.base == pred.base:
        return
    for i, (g, p) in enumerate(zip(gold.base, pred.base)):
        if g != p:
            raise BaseMismatchError(i, g, p)
    raise BaseMismatchError(min(len(gold.base), len(pred.base)), "", "")


def scored_positions(gold: LabeledText, opts: EvalOptions) -> list[int]:
    """Indices that the metric counts, fully determined by the gold side."""
    skipped = set()
    if not opts.count_case_ending:
        for start, end in arabic_word_spans(gold.base):
            for i in range(end - 1, start - 1, -1):
                if is_arabic_letter(gold.base[i]):
                    skipped.add(i)
                    break
    positions = []
    for i, ch in enumerate(gold.base):
        if not is_arabic_letter(ch):
            continue
        if i in skipped:
            continue
        if not opts.count_no_diacritic and gold.labels[i] == DiacriticClass.NO_DIACRITIC:
            continue
        positions.append(i)
    return positions


def score(gold: LabeledText, pred: LabeledText, opts: EvalOptions = EvalOptions()) -> EvalReport:
    """Score one line. Requires identical undiacritized text on both sides."""
    _check_bases(gold, pred)
    positions = set(scored_positions(gold, opts))
    report = EvalReport(options=opts, counted_chars=len(positions))
    for i in positions:
        if gold.labels[i] != pred.labels[i]:
            report.error_chars += 1
    for start, end in arabic_word_spans(gold.base):
        word_positions = [i for i in range(start, end) if i in positions]
        if not word_positions:
            continue
        report.counted_words += 1
        if any(gold.labels[i] != pred.labels[i] for i in word_positions):
            report.error_words += 1
    return report


def aggregate(reports: Iterable[EvalReport]) -> EvalReport:
    """Micro-average: sum numerators and denominators, then divide."""
    total: EvalReport | None = None
    for report in reports:
        if total is None:
            total = EvalReport(options=report.options)
        elif report.options != total.options:
            raise MixedOptionsError(
                f"cannot aggregate {report.options} with {total.options}"
            )
        total.counted_chars += report.counted_chars
        total.error_chars += report.error_chars
        total.counted_words += report.counted_words
        total.error_words += report.error_words
    return total if total is not None else EvalReport(options=EvalOptions())


def score_corpus(
    gold_lines: Sequence[LabeledText],
    pred_lines: Sequence[LabeledText],
    opts: EvalOptions = EvalOptions(),
) -> EvalReport:
    if len(gold_lines) != len(pred_lines):
        raise ValueError(
            f"gold has {len(gold_lines)} lines but prediction has {len(pred_lines)}"
        )
    return aggregate(score(g, p, opts) for g, p in zip(gold_lines, pred_lines))


CLASS_NAMES = tuple(cls.name for cls in DiacriticClass)


@dataclass
class ConfusionMatrix:
    """Gold-by-predicted class counts over the scored positions."""

    counts: np.ndarray

    @classmethod
    def zeros(cls) -> "ConfusionMatrix":
        return cls(np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64))

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def der(self) -> float:
        return 100.0 * (self.total - self.correct) / self.total if self.total else 0.0

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh)
        writer.writerow(["gold\\predicted", *CLASS_NAMES])
        for name, row in zip(CLASS_NAMES, self.counts):
            writer.writerow([name, *row.tolist()])


def confusion(
    gold: LabeledText, pred: LabeledText, opts: EvalOptions = EvalOptions()
) -> ConfusionMatrix:
    """Count gold/predicted class pairs over exactly the scored positions."""
    _check_bases(gold, pred)
    matrix = ConfusionMatrix.zeros()
    for i in scored_positions(gold, opts):
        matrix.counts[int(gold.labels[i]), int(pred.labels[i])] += 1
    return matrix


def confusion_corpus(
    gold_lines: Sequence[LabeledText],
    pred_lines: Sequence[LabeledText],
    opts: EvalOptions = EvalOptions(),
) -> ConfusionMatrix:
    matrix = ConfusionMatrix.zeros()
    for g, p in zip(gold_lines, pred_lines):
        matrix = matrix.add(confusion(g, p, opts))
    return matrix
