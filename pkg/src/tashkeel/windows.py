"""Fixed-width context windows for per-character classification.

Every target character is encoded as 100 vocabulary ids: the 50 characters
before it, then the character itself followed by the 49 after it. Positions
beyond the sentence bounds hold the PAD id.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Iterator, Literal

import numpy as np

from .codec import DiacriticClass, LabeledText, Vocabulary, is_arabic_letter
from .corpus import Corpus

WINDOW_SIZE = 100
HALF_WINDOW = 50


class IdOutOfRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ContextWindow:
    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.ids) != WINDOW_SIZE:
            raise ValueError(f"window must hold {WINDOW_SIZE} ids, got {len(self.ids)}")


@dataclass(frozen=True)
class Example:
    window: ContextWindow
    label: DiacriticClass


def context_window(lt: LabeledText, i: int, vocab: Vocabulary) -> ContextWindow:
    """Encode the window centered (by convention) on position i."""
    if not 0 <= i < len(lt.base):
        raise IndexError(f"position {i} outside text of length {len(lt.base)}")
    ids = []
    for j in range(i - HALF_WINDOW, i + HALF_WINDOW):
        if 0 <= j < len(lt.base):
            ids.append(vocab.id(lt.base[j]))
        else:
            ids.append(vocab.pad_id)
    return ContextWindow(tuple(ids))


def window_matrix(lt: LabeledText, positions: Iterable[int], vocab: Vocabulary) -> np.ndarray:
    """Windows for many positions of one line as an (n, 100) int array."""
    encoded = np.array(vocab.encode(lt.base), dtype=np.int64)
    padded = np.full(len(encoded) + 2 * HALF_WINDOW, vocab.pad_id, dtype=np.int64)
    padded[HALF_WINDOW : HALF_WINDOW + len(encoded)] = encoded
    rows = [padded[p : p + WINDOW_SIZE] for p in positions]
    return np.stack(rows) if rows else np.zeros((0, WINDOW_SIZE), dtype=np.int64)


PadPolicy = Literal["zeros", "index"]


def one_hot_expand(
    window: ContextWindow | np.ndarray,
    width: int,
    vocab: Vocabulary,
    pad_policy: PadPolicy = "zeros",
) -> np.ndarray:
    """Concatenate per-position one-hot vectors into a single flat vector.

    Under the "zeros" policy the PAD id contributes an all-zero block and the
    ids above it shift down one slot, so the one-hot space stays compact (a
    75-id vocabulary fits width 74). Under "index" the PAD id keeps a column
    of its own.
    """
    ids = np.asarray(window.ids if isinstance(window, ContextWindow) else window)
    flat = ids.reshape(-1)
    out = np.zeros((flat.size, width), dtype=np.float64)
    if pad_policy == "zeros":
        keep = flat != vocab.pad_id
        slots = np.where(flat > vocab.pad_id, flat - 1, flat)[keep]
    else:
        keep = np.ones(flat.size, dtype=bool)
        slots = flat
    if slots.size and (slots.min() < 0 or slots.max() >= width):
        bad = flat[keep][(slots < 0) | (slots >= width)][0]
        raise IdOutOfRangeError(f"id {int(bad)} does not fit one-hot width {width}")
    out[np.nonzero(keep)[0], slots] = 1.0
    return out.reshape(*ids.shape[:-1], ids.shape[-1] * width)


PositionPolicy = Literal["arabic-letters", "all"]


def eligible_positions(lt: LabeledText, policy: PositionPolicy = "arabic-letters") -> list[int]:
    if policy == "all":
        return list(range(len(lt.base)))
    return [i for i, ch in enumerate(lt.base) if is_arabic_letter(ch)]


def examples_from_corpus(
    corpus: Corpus | Iterable[LabeledText],
    vocab: Vocabulary,
    policy: PositionPolicy = "arabic-letters",
) -> Iterator[Example]:
    """One Example per eligible position, in line order then position order."""
    lines = corpus.decode() if isinstance(corpus, Corpus) else corpus
    for lt in lines:
        for i in eligible_positions(lt, policy):
            yield Example(context_window(lt, i, vocab), lt.labels[i])


_CACHE_MAGIC = b"TKEX1\n"


def write_example_cache(path, examples: Iterable[Example], vocab: Vocabulary) -> int:
    """Binary example cache: header with the vocab hash, then fixed records
    of 100 little-endian uint16 ids plus one label byte.
    """
    count = 0
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(vocab.content_hash().encode("ascii") + b"\n")
        for ex in examples:
            fh.write(struct.pack(f"<{WINDOW_SIZE}H", *ex.window.ids))
            fh.write(struct.pack("<B", int(ex.label)))
            count += 1
    return count


def read_example_cache(path, vocab: Vocabulary) -> Iterator[Example]:
    record = struct.calcsize(f"<{WINDOW_SIZE}H") + 1
    with open(path, "rb") as fh:
        if fh.read(len(_CACHE_MAGIC)) != _CACHE_MAGIC:
            raise ValueError("not an example cache file")
        stored_hash = fh.readline().strip().decode("ascii")
        if stored_hash != vocab.content_hash():
            raise ValueError("example cache was built with a different vocabulary")
        while chunk := fh.read(record):
            if len(chunk) != record:
                raise ValueError("truncated example cache")
            ids = struct.unpack(f"<{WINDOW_SIZE}H", chunk[:-1])
            yield Example(ContextWindow(ids), DiacriticClass(chunk[-1]))
