"""Named parameter blocks, checkpoint serialization, and weight averaging.

The checkpoint container is a flat binary format: a fixed header (format
version, block count) followed by one record per block holding the name, the
element type, the dimensions, and the raw little-endian values. Save/load
round-trips bit-exactly on any platform.
"""

from __future__ import annotations

import io
import struct
from typing import Iterator, Sequence

import numpy as np

from .tensor import Tensor

_MAGIC = b"TKCP"
_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {code: dt for dt, code in _DTYPE_CODES.items()}


class ParameterSet:
    """Ordered, uniquely named Tensors; iteration order defines the flattened
    parameter vector used by optimizers, averaging and checkpoints.
    """

    def __init__(self) -> None:
        self._blocks: dict[str, Tensor] = {}

    def add(self, name: str, values: np.ndarray | Tensor) -> Tensor:
        if name in self._blocks:
            raise ValueError(f"duplicate parameter block {name!r}")
        tensor = values if isinstance(values, Tensor) else Tensor(values)
        tensor.requires_grad = True
        self._blocks[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._blocks[name]

    def __contains__(self, name: str) -> bool:
        return name in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def names(self) -> list[str]:
        return list(self._blocks)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._blocks.items())

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self._blocks.values())

    def zero_grad(self) -> None:
        for t in self._blocks.values():
            t.grad = None

    def gradients(self) -> dict[str, np.ndarray]:
        """Per-block gradients after backward(); missing ones are zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._blocks.items()
        }

    def copy(self) -> "ParameterSet":
        clone = ParameterSet()
        for name, t in self._blocks.items():
            clone.add(name, t.data.copy())
        return clone

    def load_values(self, other: "ParameterSet") -> None:
        if other.names() != self.names():
            raise ValueError("parameter block names do not match")
        for name, t in self._blocks.items():
            src = other[name].data
            if src.shape != t.data.shape:
                raise ValueError(f"shape mismatch for block {name!r}")
            t.data = src.copy()


def average_checkpoints(snapshots: Sequence[ParameterSet]) -> ParameterSet:
    """Elementwise arithmetic mean of identically shaped parameter sets."""
    if not snapshots:
        raise ValueError("need at least one snapshot to average")
    first = snapshots[0]
    for snap in snapshots[1:]:
        if snap.names() != first.names():
            raise ValueError("snapshots have different block names")
        for name, t in snap.items():
            if t.data.shape != first[name].data.shape:
                raise ValueError(f"snapshot shapes differ for block {name!r}")
    out = ParameterSet()
    for name, t in first.items():
        acc = t.data.astype(np.float64).copy()
        for snap in snapshots[1:]:
            acc += snap[name].data
        out.add(name, (acc / len(snapshots)).astype(t.data.dtype))
    return out


def save_checkpoint(params: ParameterSet, target) -> None:
    """Write the checkpoint container to a path or binary file object."""
    if hasattr(target, "write"):
        _write(params, target)
    else:
        with open(target, "wb") as fh:
            _write(params, fh)


def _write(params: ParameterSet, fh) -> None:
    fh.write(_MAGIC)
    fh.write(struct.pack("<II", _VERSION, len(params)))
    for name, tensor in params.items():
        raw = np.ascontiguousarray(tensor.data)
        if raw.dtype not in _DTYPE_CODES:
            raise ValueError(f"unsupported checkpoint dtype {raw.dtype}")
        encoded = name.encode("utf-8")
        fh.write(struct.pack("<I", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<BI", _DTYPE_CODES[raw.dtype], raw.ndim))
        fh.write(struct.pack(f"<{raw.ndim}Q", *raw.shape))
        fh.write(raw.astype(raw.dtype.newbyteorder("<"), copy=False).tobytes())


def load_checkpoint(source) -> ParameterSet:
    if hasattr(source, "read"):
        return _read(source)
    with open(source, "rb") as fh:
        return _read(fh)


def _read(fh) -> ParameterSet:
    if fh.read(4) != _MAGIC:
        raise ValueError("not a checkpoint file")
    version, count = struct.unpack("<II", fh.read(8))
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    params = ParameterSet()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", fh.read(4))
        name = fh.read(name_len).decode("utf-8")
        code, ndim = struct.unpack("<BI", fh.read(5))
        shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
        dtype = _CODE_DTYPES[code]
        raw = fh.read(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize)
        values = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype)
        params.add(name, values.reshape(shape))
    return params


def checkpoint_bytes(params: ParameterSet) -> bytes:
    buf = io.BytesIO()
    _write(params, buf)
    return buf.getvalue()


def checkpoint_from_bytes(blob: bytes) -> ParameterSet:
    return _read(io.BytesIO(blob))
