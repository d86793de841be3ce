"""Optimizers and gradient transforms.

AdaGrad and Adam implement the published update rules (Adam with bias
correction). Block normalization rescales each gradient block to unit L2
norm before the optimizer step; gradient clipping is available but off
unless asked for.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .params import ParameterSet

BNG_EPSILON = 1e-8


class AdaGrad:
    def __init__(self, lr: float = 0.01, eps: float = 1e-7):
        self.lr = lr
        self.eps = eps
        self._accum: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet, grads: Mapping[str, np.ndarray]) -> None:
        for name, tensor in params.items():
            g = grads[name]
            if g.shape != tensor.data.shape:
                raise ValueError(f"gradient shape mismatch for block {name!r}")
            accum = self._accum.setdefault(name, np.zeros_like(tensor.data, dtype=np.float64))
            accum += np.square(g, dtype=np.float64)
            tensor.data -= (self.lr * g / (np.sqrt(accum) + self.eps)).astype(tensor.data.dtype)


class Adam:
    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-7):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: ParameterSet, grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        for name, tensor in params.items():
            g = np.asarray(grads[name], dtype=np.float64)
            if g.shape != tensor.data.shape:
                raise ValueError(f"gradient shape mismatch for block {name!r}")
            m = self._m.setdefault(name, np.zeros_like(tensor.data, dtype=np.float64))
            v = self._v.setdefault(name, np.zeros_like(tensor.data, dtype=np.float64))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            update = self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            tensor.data -= update.astype(tensor.data.dtype)


def bng_normalize(grads: Mapping[str, np.ndarray], eps: float = BNG_EPSILON) -> dict[str, np.ndarray]:
    """Scale each block to unit L2 norm; zero blocks pass through unchanged.

    The epsilon floor only guards the division: any block with norm above it
    comes out with norm exactly 1, preserving direction.
    """
    out = {}
    for name, g in grads.items():
        norm = float(np.linalg.norm(g))
        out[name] = g / max(norm, eps)
    return out


def clip_gradients(grads: Mapping[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Rescale all blocks together when the global L2 norm exceeds max_norm."""
    total = float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values())))
    if total <= max_norm or total == 0.0:
        return dict(grads)
    scale = max_norm / total
    return {name: g * scale for name, g in grads.items()}
