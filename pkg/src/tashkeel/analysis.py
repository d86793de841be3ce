"""Error analysis and reporting: class censuses, line ranking, embedding export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np

from .codec import LabeledText, Vocabulary, is_arabic_letter
from .corpus import Corpus
from .metrics import CLASS_NAMES, EvalOptions, EvalReport, aggregate, score
from .models import Model


@dataclass
class ClassCensus:
    """Per-class example counts for one or more corpus splits."""

    splits: list[str]
    counts: dict[str, np.ndarray]  # split -> 15 counts

    @property
    def totals(self) -> np.ndarray:
        return np.sum([self.counts[s] for s in self.splits], axis=0)

    @property
    def percentages(self) -> np.ndarray:
        totals = self.totals
        grand = totals.sum()
        return 100.0 * totals / grand if grand else np.zeros(len(CLASS_NAMES))

    def write_csv(self, fh: TextIO) -> None:
        writer = csv.writer(fh)
        writer.writerow(["class", *self.splits, "total", "pct"])
        totals = self.totals
        pct = self.percentages
        for i, name in enumerate(CLASS_NAMES):
            row = [name, *(int(self.counts[s][i]) for s in self.splits),
                   int(totals[i]), f"{pct[i]:.2f}"]
            writer.writerow(row)


def class_census(corpora: Corpus | Mapping[str, Corpus]) -> ClassCensus:
    """Count label occurrences over Arabic letters, per split and overall."""
    if isinstance(corpora, Corpus):
        corpora = {corpora.provenance: corpora}
    splits = list(corpora)
    counts = {}
    for split, corpus in corpora.items():
        tally = np.zeros(len(CLASS_NAMES), dtype=np.int64)
        for lt in corpus.decode():
            for ch, label in zip(lt.base, lt.labels):
                if is_arabic_letter(ch):
                    tally[int(label)] += 1
        counts[split] = tally
    return ClassCensus(splits=splits, counts=counts)


@dataclass
class RankedLine:
    index: int
    gold: str
    predicted: str
    report: EvalReport


def rank_lines(
    gold_lines: Sequence[LabeledText],
    pred_lines: Sequence[LabeledText],
    opts: EvalOptions = EvalOptions(),
    gold_text: Sequence[str] | None = None,
    pred_text: Sequence[str] | None = None,
) -> list[RankedLine]:
    """Lines sorted best-first by per-line DER; ties keep original order."""
    if len(gold_lines) != len(pred_lines):
        raise ValueError("gold and prediction line counts differ")
    entries = []
    for i, (g, p) in enumerate(zip(gold_lines, pred_lines)):
        entries.append(
            RankedLine(
                index=i,
                gold=gold_text[i] if gold_text else "",
                predicted=pred_text[i] if pred_text else "",
                report=score(g, p, opts),
            )
        )
    entries.sort(key=lambda e: (e.report.der, e.index))
    return entries


def best_lines(ranked: Sequence[RankedLine], n: int) -> list[RankedLine]:
    return list(ranked[:n])


def worst_lines(ranked: Sequence[RankedLine], n: int) -> list[RankedLine]:
    return list(ranked[-n:])[::-1]


def ranked_aggregate(ranked: Sequence[RankedLine]) -> EvalReport:
    return aggregate(entry.report for entry in ranked)


def write_ranking_csv(ranked: Sequence[RankedLine], fh: TextIO) -> None:
    writer = csv.writer(fh)
    writer.writerow(["rank", "line", "der", "wer", "chars", "char_errors", "gold", "predicted"])
    for rank, entry in enumerate(ranked, start=1):
        writer.writerow([
            rank, entry.index + 1, f"{entry.report.der:.4f}", f"{entry.report.wer:.4f}",
            entry.report.counted_chars, entry.report.error_chars, entry.gold, entry.predicted,
        ])


class NoEmbeddingLayerError(ValueError):
    pass


def export_embeddings(model: Model) -> list[tuple[str, np.ndarray]]:
    """One (token, vector) row per vocabulary id, in id order.

    Special tokens export under their angle-bracket names. Families without
    an embedding block cannot export.
    """
    if "embedding/W" not in model.params:
        raise NoEmbeddingLayerError(f"family {model.config.family!r} has no embedding layer")
    weights = model.params["embedding/W"].data
    vocab: Vocabulary = model.vocab
    if weights.shape[0] < len(vocab):
        raise NoEmbeddingLayerError(
            f"embedding has {weights.shape[0]} rows but the vocabulary needs {len(vocab)}"
        )
    rows = []
    specials = {idx: token for token, idx in vocab.special_ids().items()}
    for idx in range(len(vocab)):
        token = specials.get(idx, vocab.chars[idx] if idx < len(vocab.chars) else "")
        rows.append((token, weights[idx].copy()))
    return rows


def write_embeddings_tsv(rows: Sequence[tuple[str, np.ndarray]], fh: TextIO) -> None:
    for token, vector in rows:
        fh.write(token + "\t" + "\t".join(f"{v:.8g}" for v in vector) + "\n")
