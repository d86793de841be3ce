"""Network building blocks on top of the autodiff tensor.

Weights are initialized with uniform fan-in scaling from a seeded generator;
the LSTM forget-gate bias starts at 1 so gates pass state through early in
training.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .tensor import Tensor, add, concat, matmul, mul, sigmoid, tanh


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                 dtype=np.float32) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def embedding_init(rng: np.random.Generator, rows: int, dim: int, dtype=np.float32) -> np.ndarray:
    return rng.uniform(-0.05, 0.05, size=(rows, dim)).astype(dtype)


def dense_forward(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b for a (batch, features) input."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ValueError(f"dense input width {x.data.shape[-1]} != weight rows {w.data.shape[0]}")
    return add(matmul(x, w), b)


class LstmDirectionParams(NamedTuple):
    """One direction of an LSTM layer: input and recurrent weights plus bias.

    ``wx`` is (input_dim, 4*hidden), ``wh`` is (hidden, 4*hidden), ``b`` is
    (4*hidden,), gate order input/forget/candidate/output.
    """

    wx: Tensor
    wh: Tensor
    b: Tensor

    @property
    def hidden(self) -> int:
        return self.wh.data.shape[0]


def init_lstm_direction(rng: np.random.Generator, input_dim: int, hidden: int,
                        dtype=np.float32) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    wx = uniform_init(rng, (input_dim, 4 * hidden), input_dim, dtype)
    wh = uniform_init(rng, (hidden, 4 * hidden), hidden, dtype)
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0  # forget gate open at start
    return wx, wh, b


def lstm_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor,
              params: LstmDirectionParams) -> tuple[Tensor, Tensor]:
    hidden = params.hidden
    z = add(add(matmul(x_t, params.wx), matmul(h_prev, params.wh)), params.b)
    i = sigmoid(z[:, 0 * hidden : 1 * hidden])
    f = sigmoid(z[:, 1 * hidden : 2 * hidden])
    g = tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden : 4 * hidden])
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def lstm_forward(xs: Sequence[Tensor], params: LstmDirectionParams,
                 reverse: bool = False) -> list[Tensor]:
    """Run one direction over a sequence of (batch, features) steps.

    The returned hidden states are always in original time order; ``reverse``
    only changes the direction the recurrence reads the input.
    """
    if not xs:
        raise ValueError("lstm_forward needs a non-empty sequence")
    batch = xs[0].data.shape[0]
    dtype = xs[0].data.dtype
    h = Tensor(np.zeros((batch, params.hidden), dtype=dtype))
    c = Tensor(np.zeros((batch, params.hidden), dtype=dtype))
    steps = reversed(xs) if reverse else xs
    hs: list[Tensor] = []
    for x_t in steps:
        h, c = lstm_step(x_t, h, c, params)
        hs.append(h)
    if reverse:
        hs.reverse()
    return hs


def bilstm_forward(xs: Sequence[Tensor], fwd: LstmDirectionParams,
                   bwd: LstmDirectionParams) -> list[Tensor]:
    """Bidirectional layer: step t holds [forward state t, backward state t]."""
    hs_f = lstm_forward(xs, fwd, reverse=False)
    hs_b = lstm_forward(xs, bwd, reverse=True)
    return [concat([hf, hb], axis=1) for hf, hb in zip(hs_f, hs_b)]
