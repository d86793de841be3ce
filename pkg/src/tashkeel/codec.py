"""Conversion between diacritized Arabic text and (base characters, diacritic labels).

The eight combining marks (fatha, damma, kasra, their tanwin forms, sukun,
shadda) attach to the preceding letter. A letter carries 0, 1 or 2 marks;
the only legal 2-mark combination is shadda plus one vowel mark, in either
order. That gives exactly 15 label classes per letter.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Iterator, Sequence

FATHA = "َ"
FATHATAH = "ً"
DAMMA = "ُ"
DAMMATAN = "ٌ"
KASRA = "ِ"
KASRATAN = "ٍ"
SUKUN = "ْ"
SHADDA = "ّ"

DIACRITIC_MARKS = frozenset((FATHA, FATHATAH, DAMMA, DAMMATAN, KASRA, KASRATAN, SUKUN, SHADDA))
_VOWEL_MARKS = frozenset((FATHA, FATHATAH, DAMMA, DAMMATAN, KASRA, KASRATAN))

TATWEEL = "ـ"


class DiacriticClass(IntEnum):
    """The 15 per-letter label classes, in canonical table order."""

    NO_DIACRITIC = 0
    FATHA = 1
    FATHATAH = 2
    DAMMA = 3
    DAMMATAN = 4
    KASRA = 5
    KASRATAN = 6
    SUKUN = 7
    SHADDA = 8
    SHADDA_FATHA = 9
    SHADDA_FATHATAH = 10
    SHADDA_DAMMA = 11
    SHADDA_DAMMATAN = 12
    SHADDA_KASRA = 13
    SHADDA_KASRATAN = 14

    @property
    def marks(self) -> str:
        """Canonical mark sequence; shadda composites emit shadda first."""
        return _CLASS_TO_MARKS[self]

    @property
    def mnemonic(self) -> str:
        """Short transliteration-style code ("" , "a", "~a", ...)."""
        return _CLASS_TO_MNEMONIC[self]


_CLASS_TO_MARKS: dict[DiacriticClass, str] = {
    DiacriticClass.NO_DIACRITIC: "",
    DiacriticClass.FATHA: FATHA,
    DiacriticClass.FATHATAH: FATHATAH,
    DiacriticClass.DAMMA: DAMMA,
    DiacriticClass.DAMMATAN: DAMMATAN,
    DiacriticClass.KASRA: KASRA,
    DiacriticClass.KASRATAN: KASRATAN,
    DiacriticClass.SUKUN: SUKUN,
    DiacriticClass.SHADDA: SHADDA,
    DiacriticClass.SHADDA_FATHA: SHADDA + FATHA,
    DiacriticClass.SHADDA_FATHATAH: SHADDA + FATHATAH,
    DiacriticClass.SHADDA_DAMMA: SHADDA + DAMMA,
    DiacriticClass.SHADDA_DAMMATAN: SHADDA + DAMMATAN,
    DiacriticClass.SHADDA_KASRA: SHADDA + KASRA,
    DiacriticClass.SHADDA_KASRATAN: SHADDA + KASRATAN,
}

_CLASS_TO_MNEMONIC: dict[DiacriticClass, str] = {
    DiacriticClass.NO_DIACRITIC: "",
    DiacriticClass.FATHA: "a",
    DiacriticClass.FATHATAH: "F",
    DiacriticClass.DAMMA: "u",
    DiacriticClass.DAMMATAN: "N",
    DiacriticClass.KASRA: "i",
    DiacriticClass.KASRATAN: "K",
    DiacriticClass.SUKUN: "o",
    DiacriticClass.SHADDA: "~",
    DiacriticClass.SHADDA_FATHA: "~a",
    DiacriticClass.SHADDA_FATHATAH: "~F",
    DiacriticClass.SHADDA_DAMMA: "~u",
    DiacriticClass.SHADDA_DAMMATAN: "~N",
    DiacriticClass.SHADDA_KASRA: "~i",
    DiacriticClass.SHADDA_KASRATAN: "~K",
}

# Normalized mark-run lookup: both shadda+vowel orders map to the composite.
_RUN_TO_CLASS: dict[str, DiacriticClass] = {}
for _cls, _marks in _CLASS_TO_MARKS.items():
    _RUN_TO_CLASS[_marks] = _cls
    if len(_marks) == 2:
        _RUN_TO_CLASS[_marks[::-1]] = _cls


class CharCategory(Enum):
    ARABIC_LETTER = "arabic_letter"
    DIGIT = "digit"
    PUNCTUATION = "punctuation"
    WHITESPACE = "whitespace"
    OTHER = "other"


class DiacriticError(ValueError):
    """A mark run that does not form one of the 15 classes, or a mark in an
    illegal position (before any letter, or after a non-letter).

    ``offset`` is the codepoint index of the offending mark in the input.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class InvariantViolation(ValueError):
    """A LabeledText that breaks its own construction rules."""


@dataclass(frozen=True)
class LabeledText:
    """Parallel sequences: bare characters and one diacritic class per character.

    ``base`` contains no combining diacritic marks; ``labels[i]`` is the class
    of the mark run that followed ``base[i]`` in the original text. Non-letter
    positions always carry NO_DIACRITIC.
    """

    base: str
    labels: tuple[DiacriticClass, ...]

    def __post_init__(self) -> None:
        if len(self.base) != len(self.labels):
            raise InvariantViolation(
                f"base length {len(self.base)} != labels length {len(self.labels)}"
            )

    def __len__(self) -> int:
        return len(self.base)


def categorize(ch: str) -> CharCategory:
    """Classify a single character. Total: every scalar gets a category.

    Arabic letters are the letters of the base Arabic block (hamza forms
    included) plus tatweel, which is kept as letter-like filler. Digits are
    ASCII and Arabic-Indic. Combining marks fall through to OTHER; they are
    consumed during decoding and never appear as standalone text.
    """
    if len(ch) != 1:
        raise ValueError(f"expected a single character, got {ch!r}")
    if ch in DIACRITIC_MARKS:
        return CharCategory.OTHER
    cp = ord(ch)
    if 0x0600 <= cp <= 0x06FF:
        if ch == TATWEEL:
            return CharCategory.ARABIC_LETTER
        cat = unicodedata.category(ch)
        if cat == "Lo":
            return CharCategory.ARABIC_LETTER
        if cat == "Nd":
            return CharCategory.DIGIT
        if cat.startswith("P"):
            return CharCategory.PUNCTUATION
        return CharCategory.OTHER
    if ch.isspace():
        return CharCategory.WHITESPACE
    if "0" <= ch <= "9":
        return CharCategory.DIGIT
    if unicodedata.category(ch).startswith("P"):
        return CharCategory.PUNCTUATION
    return CharCategory.OTHER


def is_arabic_letter(ch: str) -> bool:
    return categorize(ch) == CharCategory.ARABIC_LETTER


def strip_diacritics(text: str) -> LabeledText:
    """Decode a diacritized string into base characters plus label classes.

    Raises DiacriticError for a mark run that is not one of the 15 classes,
    a mark with no preceding character, or a mark following a non-letter.
    """
    base: list[str] = []
    labels: list[DiacriticClass] = []
    run = ""
    run_start = -1
    for offset, ch in enumerate(text):
        if ch in DIACRITIC_MARKS:
            if not base:
                raise DiacriticError("diacritic mark before any base character", offset)
            if not is_arabic_letter(base[-1]):
                raise DiacriticError(
                    f"diacritic mark after non-Arabic-letter {base[-1]!r}", offset
                )
            if not run:
                run_start = offset
            run += ch
            if run not in _RUN_TO_CLASS:
                raise DiacriticError(f"invalid mark run {run!r}", run_start)
        else:
            if run:
                labels[-1] = _RUN_TO_CLASS[run]
                run = ""
            base.append(ch)
            labels.append(DiacriticClass.NO_DIACRITIC)
    if run:
        labels[-1] = _RUN_TO_CLASS[run]
    return LabeledText(base="".join(base), labels=tuple(labels))


def apply_diacritics(lt: LabeledText) -> str:
    """Inverse of strip_diacritics: re-insert canonical mark sequences."""
    out: list[str] = []
    for i, (ch, label) in enumerate(zip(lt.base, lt.labels)):
        if label != DiacriticClass.NO_DIACRITIC and not is_arabic_letter(ch):
            raise InvariantViolation(
                f"non-letter {ch!r} at position {i} carries label {label.name}"
            )
        out.append(ch)
        out.append(label.marks)
    return "".join(out)


def remove_diacritics(text: str) -> str:
    """Drop the eight marks without decoding classes. Never raises."""
    return "".join(ch for ch in text if ch not in DIACRITIC_MARKS)


PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"
SOS_TOKEN = "<SOS>"
EOS_TOKEN = "<EOS>"

_FORMAT_LINE_PREFIX = "tashkeel-vocab-v1"


class Vocabulary:
    """Character-to-id map: corpus characters sorted by codepoint, ids from 0,
    then the special tokens. Lookup of an unseen character yields the UNK id.
    """

    def __init__(self, chars: Sequence[str], with_sentence_marks: bool = False):
        ordered = sorted(set(chars))
        for ch in ordered:
            if len(ch) != 1:
                raise ValueError(f"vocabulary entries must be single characters, got {ch!r}")
            if ch in DIACRITIC_MARKS:
                raise ValueError("diacritic marks cannot be vocabulary entries")
            if ch == "\n":
                raise ValueError("newline cannot be a vocabulary entry")
        self.chars: tuple[str, ...] = tuple(ordered)
        self._char_to_id = {ch: i for i, ch in enumerate(self.chars)}
        n = len(self.chars)
        self.pad_id = n
        self.unk_id = n + 1
        self.sos_id = n + 2 if with_sentence_marks else None
        self.eos_id = n + 3 if with_sentence_marks else None
        self.with_sentence_marks = with_sentence_marks

    def __len__(self) -> int:
        return len(self.chars) + (4 if self.with_sentence_marks else 2)

    def __contains__(self, ch: str) -> bool:
        return ch in self._char_to_id

    def id(self, ch: str) -> int:
        return self._char_to_id.get(ch, self.unk_id)

    def char(self, idx: int) -> str:
        if 0 <= idx < len(self.chars):
            return self.chars[idx]
        for token, special in self.special_ids().items():
            if special == idx:
                return token
        raise KeyError(idx)

    def encode(self, text: str) -> list[int]:
        return [self.id(ch) for ch in text]

    def special_ids(self) -> dict[str, int]:
        ids = {PAD_TOKEN: self.pad_id, UNK_TOKEN: self.unk_id}
        if self.with_sentence_marks:
            ids[SOS_TOKEN] = self.sos_id
            ids[EOS_TOKEN] = self.eos_id
        return ids

    def serialize(self) -> str:
        """One character per line in id order, after a header line that pins
        the format version and the special-token ids. Bit-exact across runs.
        """
        header = f"{_FORMAT_LINE_PREFIX} pad={self.pad_id} unk={self.unk_id}"
        if self.with_sentence_marks:
            header += f" sos={self.sos_id} eos={self.eos_id}"
        return "\n".join([header, *self.chars]) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "Vocabulary":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith(_FORMAT_LINE_PREFIX):
            raise ValueError("not a vocabulary file")
        fields = dict(part.split("=") for part in lines[0].split(" ")[1:])
        vocab = cls(lines[1:], with_sentence_marks="sos" in fields)
        expected = {k: int(v) for k, v in fields.items()}
        actual = {
            "pad": vocab.pad_id,
            "unk": vocab.unk_id,
            **({"sos": vocab.sos_id, "eos": vocab.eos_id} if vocab.with_sentence_marks else {}),
        }
        if expected != actual:
            raise ValueError(f"special-token ids {expected} do not match entries ({actual})")
        return vocab

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return cls.deserialize(fh.read())

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()


def build_vocabulary(
    corpus: Iterable[LabeledText | str], with_sentence_marks: bool = False
) -> Vocabulary:
    """Collect the distinct base characters of a corpus into a Vocabulary.

    Accepts decoded LabeledText values or raw (possibly diacritized) lines.
    A pure function of the character set: line order never matters.
    """
    chars: set[str] = set()
    empty = True
    for item in corpus:
        empty = False
        base = item if isinstance(item, str) else item.base
        if isinstance(item, str):
            base = strip_diacritics(item).base
        chars.update(base)
    if empty:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    return Vocabulary(sorted(chars), with_sentence_marks=with_sentence_marks)


def iter_labeled(lines: Iterable[str]) -> Iterator[LabeledText]:
    for line in lines:
        yield strip_diacritics(line)
