"""Shared test utilities: random data generators and independent oracles.

The oracles here are deliberately written from scratch, in a different style
from the package code, so they can arbitrate: a brute-force DER/WER scorer
over raw strings, an exhaustive CRF path enumerator, and a central
finite-difference gradient checker.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from tashkeel.codec import DiacriticClass, LabeledText

ARABIC_LETTERS = "ءآأؤإئابةتثجحخدذرزسشصضطظعغفقكلمنهوىي"
OTHER_CHARS = " .,:0123456789؟"

FATHA, FATHATAH = "َ", "ً"
DAMMA, DAMMATAN = "ُ", "ٌ"
KASRA, KASRATAN = "ِ", "ٍ"
SUKUN, SHADDA = "ْ", "ّ"
ALL_MARKS = {FATHA, FATHATAH, DAMMA, DAMMATAN, KASRA, KASRATAN, SUKUN, SHADDA}


def random_labeled_text(rng: np.random.Generator, max_len: int = 40,
                        min_len: int = 0) -> LabeledText:
    """A random valid LabeledText: marks only on Arabic letters."""
    n = int(rng.integers(min_len, max_len + 1))
    base = []
    labels = []
    for _ in range(n):
        if rng.random() < 0.75:
            base.append(ARABIC_LETTERS[int(rng.integers(len(ARABIC_LETTERS)))])
            labels.append(DiacriticClass(int(rng.integers(15))))
        else:
            base.append(OTHER_CHARS[int(rng.integers(len(OTHER_CHARS)))])
            labels.append(DiacriticClass.NO_DIACRITIC)
    return LabeledText(base="".join(base), labels=tuple(labels))


def perturb_labels(rng: np.random.Generator, lt: LabeledText, rate: float = 0.3) -> LabeledText:
    """Prediction-like copy: some Arabic letters get a different random class."""
    labels = list(lt.labels)
    for i, ch in enumerate(lt.base):
        if ch in ARABIC_LETTERS and rng.random() < rate:
            labels[i] = DiacriticClass(int(rng.integers(15)))
    return LabeledText(base=lt.base, labels=tuple(labels))


def brute_force_score(gold_text: str, pred_text: str, count_case_ending: bool,
                      count_no_diacritic: bool) -> dict:
    """DER/WER computed straight from the raw diacritized strings.

    Walks whitespace tokens, pairs each Arabic letter with its following mark
    run, and compares runs as order-insensitive mark sets.
    """

    def letter_runs(token: str) -> list[tuple[str, tuple[str, ...]]]:
        out = []
        for ch in token:
            if ch in ALL_MARKS:
                ch_prev, run = out[-1]
                out[-1] = (ch_prev, tuple(sorted(run + (ch,))))
            else:
                out.append((ch, ()))
        return [(ch, run) for ch, run in out if ch in ARABIC_LETTERS]

    counted_chars = error_chars = counted_words = error_words = 0
    gold_tokens = gold_text.split()
    pred_tokens = pred_text.split()
    assert len(gold_tokens) == len(pred_tokens)
    for g_tok, p_tok in zip(gold_tokens, pred_tokens):
        g_runs = letter_runs(g_tok)
        p_runs = letter_runs(p_tok)
        assert [ch for ch, _ in g_runs] == [ch for ch, _ in p_runs]
        word_counted = 0
        word_errors = 0
        for k, ((_, g_run), (_, p_run)) in enumerate(zip(g_runs, p_runs)):
            if not count_case_ending and k == len(g_runs) - 1:
                continue
            if not count_no_diacritic and g_run == ():
                continue
            word_counted += 1
            if g_run != p_run:
                word_errors += 1
        counted_chars += word_counted
        error_chars += word_errors
        if word_counted:
            counted_words += 1
            if word_errors:
                error_words += 1
    der = 100.0 * error_chars / counted_chars if counted_chars else 0.0
    wer = 100.0 * error_words / counted_words if counted_words else 0.0
    return {
        "der": der,
        "wer": wer,
        "counted_chars": counted_chars,
        "error_chars": error_chars,
        "counted_words": counted_words,
        "error_words": error_words,
    }


def enumerate_crf(emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray,
                  end: np.ndarray) -> tuple[float, list[int]]:
    """Exhaustive log-partition and best path over all label sequences.

    The best path breaks score ties exactly like backward Viterbi
    reconstruction with lowest-index argmax: minimal when read end-to-start.
    """
    steps, n = emissions.shape
    scores = []
    paths = []
    for path in itertools.product(range(n), repeat=steps):
        s = start[path[0]] + end[path[-1]]
        s += sum(emissions[t][path[t]] for t in range(steps))
        s += sum(transitions[a][b] for a, b in zip(path, path[1:]))
        scores.append(s)
        paths.append(path)
    m = max(scores)
    log_z = m + math.log(sum(math.exp(s - m) for s in scores))
    best_score = max(scores)
    best = min(
        (p for p, s in zip(paths, scores) if s == best_score),
        key=lambda p: tuple(reversed(p)),
    )
    return log_z, list(best)


def finite_difference_grads(loss_fn, arrays: list[np.ndarray], eps: float = 1e-6) -> list[np.ndarray]:
    """Central finite differences of loss_fn() with respect to each array."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        g_flat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn()
            flat[i] = orig - eps
            down = loss_fn()
            flat[i] = orig
            g_flat[i] = (up - down) / (2.0 * eps)
        grads.append(g)
    return grads


def max_relative_error(numeric: np.ndarray, analytic: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(numeric), np.abs(analytic)), floor)
    return float(np.max(np.abs(numeric - analytic) / denom))
