"""Corpus ingestion, cleaning, batching and statistics.

Corpus files are UTF-8, one diacritized sentence per line. Cleaning splits
lines on sentence punctuation and caps line length; statistics mirror the
standard dataset report (word/line counts and diacritics-per-letter buckets).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .codec import (
    DIACRITIC_MARKS,
    CharCategory,
    DiacriticClass,
    DiacriticError,
    LabeledText,
    Vocabulary,
    categorize,
    is_arabic_letter,
    remove_diacritics,
    strip_diacritics,
)

SPLIT_PUNCTUATION = (".", ",", "،", ":", ";", "؛",
                     "(", ")", "[", "]", "{", "}", "«", "»")

DEFAULT_MAX_LINE_LENGTH = 500


class LineTooLongError(ValueError):
    pass


@dataclass
class Corpus:
    """An ordered list of diacritized lines plus a provenance tag."""

    lines: list[str]
    provenance: str = "train"

    def __post_init__(self) -> None:
        for i, line in enumerate(self.lines):
            if "\n" in line or "\r" in line:
                raise ValueError(f"line {i + 1} contains a newline")

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self) -> Iterator[str]:
        return iter(self.lines)

    def decode(self) -> list[LabeledText]:
        """Decode every line, reporting the 1-based line number on failure."""
        out = []
        for i, line in enumerate(self.lines):
            try:
                out.append(strip_diacritics(line))
            except DiacriticError as exc:
                raise DiacriticError(
                    f"line {i + 1} of {self.provenance} corpus: {exc}", exc.offset
                ) from exc
        return out

    @classmethod
    def from_file(cls, path, provenance: str = "train") -> "Corpus":
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.rstrip("\n").rstrip("\r") for line in fh]
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines, provenance)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in self.lines:
                fh.write(line + "\n")


def toy_corpus(split: str = "train") -> Corpus:
    """The bundled 100-line training / 50-line held-out toy corpus."""
    from importlib.resources import files

    if split not in ("train", "heldout"):
        raise ValueError(f"unknown toy split {split!r}")
    path = files("tashkeel").joinpath(f"data/toy_{split}.txt")
    lines = path.read_text(encoding="utf-8").splitlines()
    return Corpus([l for l in lines if l], provenance=split)


def split_on_punctuation(line: str) -> list[str]:
    """Partition a line at sentence punctuation; each mark ends its segment.

    Segments are stripped of surrounding whitespace; segments whose content
    before the mark is empty (a bare mark) are dropped, so the kept textual
    content is preserved in order.
    """
    segments: list[str] = []
    content: list[str] = []
    for ch in line:
        if ch in SPLIT_PUNCTUATION:
            if "".join(content).strip():
                segments.append(("".join(content) + ch).strip())
            content = []
        else:
            content.append(ch)
    if "".join(content).strip():
        segments.append("".join(content).strip())
    return segments


def split_long_line(line: str, max_len: int = DEFAULT_MAX_LINE_LENGTH) -> list[str]:
    """Split a line into pieces of at most max_len non-diacritic characters.

    Splits fall on whitespace boundaries; a single word longer than the limit
    is hard-split at character boundaries (marks stay with their letter).
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    words = line.split()
    pieces: list[str] = []
    current: list[str] = []
    current_len = 0
    for word in words:
        word_len = len(remove_diacritics(word))
        if word_len > max_len:
            if current:
                pieces.append(" ".join(current))
                current, current_len = [], 0
            pieces.extend(_hard_split(word, max_len))
            continue
        joined = word_len if not current else current_len + 1 + word_len
        if current and joined > max_len:
            pieces.append(" ".join(current))
            current, current_len = [word], word_len
        else:
            current, current_len = current + [word], joined
    if current:
        pieces.append(" ".join(current))
    return pieces


def _hard_split(word: str, max_len: int) -> list[str]:
    pieces = []
    current: list[str] = []
    count = 0
    for ch in word:
        if ch not in DIACRITIC_MARKS and count == max_len:
            pieces.append("".join(current))
            current, count = [], 0
        current.append(ch)
        if ch not in DIACRITIC_MARKS:
            count += 1
    if current:
        pieces.append("".join(current))
    return pieces


def is_arabic_word(token: str) -> bool:
    """A word, for counting purposes: a token with at least one Arabic letter."""
    return any(is_arabic_letter(ch) for ch in token)


@dataclass
class StatsReport:
    """Corpus-level counts mirroring the dataset statistics table."""

    word_count: int = 0
    line_count: int = 0
    avg_chars_per_word: float = 0.0
    avg_words_per_line: float = 0.0
    pct_zero_diacritics: float = 0.0
    pct_one_diacritic: float = 0.0
    pct_two_diacritics: float = 0.0
    pct_error_diacritics: float = 0.0

    def as_records(self) -> list[tuple[str, str]]:
        return [
            ("words_count", str(self.word_count)),
            ("lines_count", str(self.line_count)),
            ("avg_chars_word", f"{self.avg_chars_per_word:.2f}"),
            ("avg_words_line", f"{self.avg_words_per_line:.2f}"),
            ("zero_diacritics_pct", f"{self.pct_zero_diacritics:.2f}"),
            ("one_diacritic_pct", f"{self.pct_one_diacritic:.2f}"),
            ("two_diacritics_pct", f"{self.pct_two_diacritics:.2f}"),
            ("error_diacritics_pct", f"{self.pct_error_diacritics:.2f}"),
        ]


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Word/line counts and diacritics-usage buckets over a cleaned corpus.

    Words are whitespace tokens containing at least one Arabic letter; char
    counts exclude the marks. Buckets count marks per Arabic letter. Decoding
    errors propagate with their line number.
    """
    word_count = 0
    char_count = 0
    letters = 0
    buckets = [0, 0, 0]  # 0, 1, 2 marks per Arabic letter
    for i, line in enumerate(corpus.lines):
        try:
            lt = strip_diacritics(line)
        except DiacriticError as exc:
            raise DiacriticError(f"line {i + 1}: {exc}", exc.offset) from exc
        for token_base, token_labels in _words_of(lt):
            word_count += 1
            char_count += len(token_base)
        for ch, label in zip(lt.base, lt.labels):
            if is_arabic_letter(ch):
                letters += 1
                buckets[len(label.marks)] += 1
    report = StatsReport(word_count=word_count, line_count=len(corpus.lines))
    if word_count:
        report.avg_chars_per_word = char_count / word_count
    if corpus.lines:
        report.avg_words_per_line = word_count / len(corpus.lines)
    if letters:
        report.pct_zero_diacritics = 100.0 * buckets[0] / letters
        report.pct_one_diacritic = 100.0 * buckets[1] / letters
        report.pct_two_diacritics = 100.0 * buckets[2] / letters
    return report


def _words_of(lt: LabeledText) -> Iterator[tuple[str, tuple[DiacriticClass, ...]]]:
    """Whitespace tokens of a decoded line that count as Arabic words."""
    start = None
    for i, ch in enumerate(lt.base + " "):
        if i < len(lt.base) and categorize(ch) != CharCategory.WHITESPACE:
            if start is None:
                start = i
        elif start is not None:
            token = lt.base[start:i]
            if is_arabic_word(token):
                yield token, lt.labels[start:i]
            start = None


def diacritic_rate(line: str) -> float:
    """Fraction of Arabic letters carrying at least one mark; 0 if none."""
    lt = strip_diacritics(line)
    letters = 0
    marked = 0
    for ch, label in zip(lt.base, lt.labels):
        if is_arabic_letter(ch):
            letters += 1
            if label != DiacriticClass.NO_DIACRITIC:
                marked += 1
    return marked / letters if letters else 0.0


def filter_by_rate(corpus: Corpus, threshold: float = 0.8) -> Corpus:
    """Keep lines whose diacritic rate is strictly above the threshold."""
    kept = [line for line in corpus.lines if diacritic_rate(line) > threshold]
    return Corpus(kept, corpus.provenance)


def preprocess(
    corpus: Corpus,
    split_punct: bool = False,
    max_len: int | None = DEFAULT_MAX_LINE_LENGTH,
    min_rate: float | None = None,
) -> Corpus:
    """Cleaning pipeline: punctuation split, rate filter, then length split."""
    lines = list(corpus.lines)
    if split_punct:
        lines = [seg for line in lines for seg in split_on_punctuation(line)]
    if min_rate is not None:
        lines = [line for line in lines if diacritic_rate(line) > min_rate]
    if max_len is not None:
        lines = [piece for line in lines for piece in split_long_line(line, max_len)]
    return Corpus(lines, corpus.provenance)


# Label ids for the wrapped target rows: the 15 classes keep their codes,
# then one output special per input special, in the same order.
NUM_CLASSES = 15
LABEL_PAD = 15
LABEL_UNK = 16
LABEL_SOS = 17
LABEL_EOS = 18
NUM_LABELS_WITH_SPECIALS = 19


@dataclass
class BatchSpec:
    """Sequence-batching policy: length cap and special-token wrapping."""

    max_len: int = DEFAULT_MAX_LINE_LENGTH
    batch_size: int = 256

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class Batch:
    """Wrapped, padded id/label matrices plus a real-character mask."""

    ids: np.ndarray      # (lines, width) int32
    labels: np.ndarray   # (lines, width) int32
    mask: np.ndarray     # (lines, width) bool; True at real characters
    lengths: np.ndarray  # (lines,) real character counts

    def unpad(self, vocab: Vocabulary) -> list[list[int]]:
        """Recover the original per-line id sequences (no specials)."""
        return [
            list(row[1 : 1 + n]) for row, n in zip(self.ids, self.lengths)
        ]


def wrap_and_pad(lines: Sequence[LabeledText], spec: BatchSpec, vocab: Vocabulary) -> Batch:
    """Build one batch: each row is SOS, ids..., EOS, then PAD to the batch max.

    Unknown characters map to UNK but keep their real gold label; the mask is
    True exactly at the real character positions.
    """
    if vocab.sos_id is None or vocab.eos_id is None:
        raise ValueError("wrap_and_pad needs a vocabulary with SOS/EOS marks")
    for i, lt in enumerate(lines):
        if len(lt) > spec.max_len:
            raise LineTooLongError(
                f"line {i + 1} has {len(lt)} characters, limit is {spec.max_len}"
            )
    width = (max(len(lt) for lt in lines) if lines else 0) + 2
    n = len(lines)
    ids = np.full((n, width), vocab.pad_id, dtype=np.int32)
    labels = np.full((n, width), LABEL_PAD, dtype=np.int32)
    mask = np.zeros((n, width), dtype=bool)
    lengths = np.zeros(n, dtype=np.int64)
    for r, lt in enumerate(lines):
        t = len(lt)
        ids[r, 0] = vocab.sos_id
        labels[r, 0] = LABEL_SOS
        ids[r, 1 : 1 + t] = vocab.encode(lt.base)
        labels[r, 1 : 1 + t] = [int(label) for label in lt.labels]
        ids[r, 1 + t] = vocab.eos_id
        labels[r, 1 + t] = LABEL_EOS
        mask[r, 1 : 1 + t] = True
        lengths[r] = t
    return Batch(ids=ids, labels=labels, mask=mask, lengths=lengths)


def iter_batches(
    lines: Sequence[LabeledText], spec: BatchSpec, vocab: Vocabulary
) -> Iterator[Batch]:
    for start in range(0, len(lines), spec.batch_size):
        yield wrap_and_pad(lines[start : start + spec.batch_size], spec, vocab)
