"""Subword data preparation for feeding diacritics into translation models.

Byte pair encoding is learned on undiacritized text and applied per word;
non-final subwords carry a joiner suffix so words reassemble exactly. A
diacritized sentence then yields three parallel streams: the undiacritized
subwords, the fully diacritized subwords ("merged"), and one compact
diacritic-form token per subword ("separated").
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .codec import DiacriticClass, LabeledText, apply_diacritics, strip_diacritics
from .corpus import Corpus

JOINER = "@@"

_FORMAT_LINE = "tashkeel-bpe-v1"


@dataclass
class BpeModel:
    """An ordered merge list; applying merges in order segments any word."""

    merges: list[tuple[str, str]]

    def merged_symbols(self) -> set[str]:
        return {a + b for a, b in self.merges}

    def serialize(self) -> str:
        lines = [_FORMAT_LINE]
        lines.extend(f"{a} {b}" for a, b in self.merges)
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "BpeModel":
        lines = text.splitlines()
        if not lines or lines[0] != _FORMAT_LINE:
            raise ValueError("not a BPE model file")
        merges = []
        for line in lines[1:]:
            if not line:
                continue
            a, sep, b = line.partition(" ")
            if not sep:
                raise ValueError(f"malformed merge line {line!r}")
            merges.append((a, b))
        return cls(merges)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path) -> "BpeModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.deserialize(fh.read())


def bpe_learn(corpus: Iterable[str], num_merges: int) -> BpeModel:
    """Learn merges from undiacritized text, most frequent pair first.

    Pair counts are weighted by word frequency; ties break lexicographically
    on the (left, right) pair so learning is deterministic.
    """
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    word_freq: Counter[tuple[str, ...]] = Counter()
    empty = True
    for line in corpus:
        empty = False
        for word in line.split():
            word_freq[tuple(word)] += 1
    if empty:
        raise ValueError("cannot learn merges from an empty corpus")
    words = [(list(symbols), freq) for symbols, freq in sorted(word_freq.items())]
    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pair_counts: Counter[tuple[str, str]] = Counter()
        for symbols, freq in words:
            for a, b in zip(symbols, symbols[1:]):
                pair_counts[(a, b)] += freq
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda item: (-item[1], item[0]))[0]
        merges.append(best)
        for symbols, _ in words:
            _merge_in_place(symbols, best)
    return BpeModel(merges)


def _merge_in_place(symbols: list[str], pair: tuple[str, str]) -> None:
    i = 0
    while i < len(symbols) - 1:
        if symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            symbols[i : i + 2] = [symbols[i] + symbols[i + 1]]
        else:
            i += 1


def segment_word(model: BpeModel, word: str) -> list[str]:
    """Split one word into subword symbols by replaying the merge list."""
    symbols = list(word)
    for pair in model.merges:
        if len(symbols) == 1:
            break
        _merge_in_place(symbols, pair)
    return symbols


def bpe_apply(model: BpeModel, sentence: str) -> list[str]:
    """Segment a sentence into subword tokens; non-final subwords of a word
    get the joiner suffix, so dropping joiners and concatenating restores it.
    """
    tokens: list[str] = []
    for word in sentence.split():
        parts = segment_word(model, word)
        tokens.extend(p + JOINER for p in parts[:-1])
        tokens.append(parts[-1])
    return tokens


def join_subwords(tokens: Sequence[str]) -> str:
    """Inverse of bpe_apply: reattach joined pieces and space-separate words."""
    words: list[str] = []
    current = ""
    for token in tokens:
        if token.endswith(JOINER):
            current += token[: -len(JOINER)]
        else:
            words.append(current + token)
            current = ""
    if current:
        words.append(current)
    return " ".join(words)


def diacritic_form(labels: Sequence[DiacriticClass]) -> str:
    """Comma-joined per-character class mnemonics, one token per subword."""
    return ",".join(label.mnemonic for label in labels)


@dataclass
class SubwordAlignment:
    """Parallel per-subword streams of one sentence."""

    subwords: list[str]
    diacritic_forms: list[str]
    merged: list[str]

    def __post_init__(self) -> None:
        if not len(self.subwords) == len(self.diacritic_forms) == len(self.merged):
            raise ValueError("alignment streams must have equal length")

    def reassemble(self) -> str:
        """Rebuild the diacritized sentence from the merged stream."""
        return join_subwords(self.merged)


def align_diacritics(sentence: str, model: BpeModel) -> SubwordAlignment:
    """Segment the undiacritized text, then re-attach each subword's marks.

    Interior whitespace is treated as single spaces; reassembling the merged
    stream reproduces the space-normalized diacritized sentence exactly.
    """
    subwords: list[str] = []
    forms: list[str] = []
    merged: list[str] = []
    for word in sentence.split():
        lt = strip_diacritics(word)
        pos = 0
        parts = segment_word(model, lt.base)
        for k, part in enumerate(parts):
            piece = LabeledText(base=part, labels=lt.labels[pos : pos + len(part)])
            pos += len(part)
            joiner = JOINER if k < len(parts) - 1 else ""
            subwords.append(part + joiner)
            forms.append(diacritic_form(piece.labels))
            merged.append(apply_diacritics(piece) + joiner)
    return SubwordAlignment(subwords=subwords, diacritic_forms=forms, merged=merged)


@dataclass
class VocabCensus:
    """Distinct-token counts for the three streams, before and after merges."""

    original_before: int
    original_after: int
    diacritized_before: int
    diacritized_after: int
    forms_before: int
    forms_after: int

    def as_records(self) -> list[tuple[str, int]]:
        return [
            ("original_before_bpe", self.original_before),
            ("original_after_bpe", self.original_after),
            ("diacritized_before_bpe", self.diacritized_before),
            ("diacritized_after_bpe", self.diacritized_after),
            ("forms_before_bpe", self.forms_before),
            ("forms_after_bpe", self.forms_after),
        ]


def vocab_census(corpus: Corpus | Iterable[str], model: BpeModel) -> VocabCensus:
    """Count distinct words and subword tokens per stream.

    Word-level diacritic forms use the same mnemonic encoding as subwords,
    so the before/after columns are directly comparable.
    """
    original_words: set[str] = set()
    diacritized_words: set[str] = set()
    form_words: set[str] = set()
    original_sub: set[str] = set()
    diacritized_sub: set[str] = set()
    form_sub: set[str] = set()
    for line in corpus:
        for word in line.split():
            lt = strip_diacritics(word)
            diacritized_words.add(word)
            original_words.add(lt.base)
            form_words.add(diacritic_form(lt.labels))
        alignment = align_diacritics(line, model)
        original_sub.update(alignment.subwords)
        diacritized_sub.update(alignment.merged)
        form_sub.update(alignment.diacritic_forms)
    return VocabCensus(
        original_before=len(original_words),
        original_after=len(original_sub),
        diacritized_before=len(diacritized_words),
        diacritized_after=len(diacritized_sub),
        forms_before=len(form_words),
        forms_after=len(form_sub),
    )
