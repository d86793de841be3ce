"""Linear-chain CRF output layer: log-likelihood loss and Viterbi decoding.

A path through labels y_1..y_T scores start[y_1] + sum of per-step emissions
+ sum of transitions + end[y_T]. The loss for a gold path is log Z minus the
path score, with log Z computed by the forward algorithm in log space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import uniform_init
from .tensor import Tensor, add, gather_pairs, logsumexp, mul, reshape, sum_


@dataclass
class CrfParams:
    """Transition matrix (from-label by to-label) plus start/end scores."""

    transitions: Tensor
    start: Tensor
    end: Tensor

    def __post_init__(self) -> None:
        n = self.transitions.data.shape
        if len(n) != 2 or n[0] != n[1]:
            raise ValueError(f"transition matrix must be square, got {n}")
        if self.start.data.shape != (n[0],) or self.end.data.shape != (n[0],):
            raise ValueError("start/end score shapes do not match the label count")

    @property
    def num_labels(self) -> int:
        return self.transitions.data.shape[0]


def init_crf(rng: np.random.Generator, num_labels: int, dtype=np.float32) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = num_labels
    return (
        uniform_init(rng, (num_labels, num_labels), scale, dtype),
        uniform_init(rng, (num_labels,), scale, dtype),
        uniform_init(rng, (num_labels,), scale, dtype),
    )


def _check_emissions(emissions: Tensor, crf: CrfParams) -> int:
    t, labels = emissions.data.shape
    if labels != crf.num_labels:
        raise ValueError(
            f"emissions have {labels} labels but the CRF has {crf.num_labels}"
        )
    if t < 1:
        raise ValueError("emission sequence must have at least one step")
    return t


def crf_path_score(emissions: Tensor, labels: np.ndarray, crf: CrfParams) -> Tensor:
    """Unnormalized score of one label path."""
    steps = _check_emissions(emissions, crf)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (steps,):
        raise ValueError(f"expected {steps} labels, got {labels.shape}")
    score = add(crf.start[int(labels[0])], crf.end[int(labels[-1])])
    score = add(score, sum_(gather_pairs(emissions, np.arange(steps), labels)))
    if steps > 1:
        score = add(score, sum_(gather_pairs(crf.transitions, labels[:-1], labels[1:])))
    return score


def crf_log_partition(emissions: Tensor, crf: CrfParams) -> Tensor:
    """log Z over all label paths, via the forward algorithm in log space."""
    steps = _check_emissions(emissions, crf)
    n = crf.num_labels
    alpha = add(crf.start, emissions[0])
    for t in range(1, steps):
        scores = add(add(reshape(alpha, (n, 1)), crf.transitions),
                     reshape(emissions[t], (1, n)))
        alpha = logsumexp(scores, axis=0)
    return logsumexp(add(alpha, crf.end), axis=0)


def crf_log_likelihood(emissions: Tensor, labels: np.ndarray, crf: CrfParams) -> Tensor:
    """Negative log-likelihood of the gold path: log Z minus the path score."""
    return add(crf_log_partition(emissions, crf),
               mul(crf_path_score(emissions, labels, crf), -1.0))


def crf_viterbi(emissions: np.ndarray, crf: CrfParams) -> list[int]:
    """Highest-scoring label path.

    Ties break deterministically toward the lowest label index, at the final
    step and at every backward step of the reconstruction.
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2:
        raise ValueError("emissions must be a (steps, labels) matrix")
    steps, n = emissions.shape
    if n != crf.num_labels:
        raise ValueError(f"emissions have {n} labels but the CRF has {crf.num_labels}")
    transitions = crf.transitions.data.astype(np.float64)
    trellis = crf.start.data.astype(np.float64) + emissions[0]
    backptr = np.zeros((steps, n), dtype=np.int64)
    for t in range(1, steps):
        candidate = trellis[:, None] + transitions
        backptr[t] = candidate.argmax(axis=0)
        trellis = candidate.max(axis=0) + emissions[t]
    trellis = trellis + crf.end.data.astype(np.float64)
    path = [int(trellis.argmax())]
    for t in range(steps - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path
