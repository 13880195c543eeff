"""Deterministic, splittable random streams.

A stream is identified by ``(master_seed, stream_id)``; its k-th draw depends
on nothing else.  Parallel work gets distinct stream ids via :meth:`spawn`,
never a shared stream.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import ParameterError

_U64 = 2**64


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value < _U64:
        raise ParameterError(f"{name} must be a 64-bit unsigned integer, got {value}")
    return value


class RngStream:
    """Counter-based normal/uniform source owned by a single consumer."""

    __slots__ = ("master_seed", "stream_id", "position")

    def __init__(self, master_seed: int, stream_id: int = 0, position: int = 0):
        self.master_seed = _check_u64("master_seed", master_seed)
        self.stream_id = _check_u64("stream_id", stream_id)
        if position < 0:
            raise ParameterError("position must be non-negative")
        self.position = int(position)

    def __repr__(self) -> str:
        return (f"RngStream(master_seed={self.master_seed}, "
                f"stream_id={self.stream_id}, position={self.position})")

    @property
    def key(self) -> tuple[np.uint64, np.uint64]:
        return np.uint64(self.master_seed), np.uint64(self.stream_id)

    def spawn(self, index: int) -> RngStream:
        """Child stream number ``index``; independent of this stream's position."""
        if index < 0:
            raise ParameterError("spawn index must be non-negative")
        seed, stream = self.key
        child = _kernels.derive_stream(seed, stream, np.int64(index))
        return RngStream(self.master_seed, int(child))

    def words(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        seed, stream = self.key
        _kernels.fill_words(seed, stream, np.int64(self.position), out)
        self.position += n
        return out

    def uniforms(self, n: int) -> np.ndarray:
        w = self.words(n)
        return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def normals(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        seed, stream = self.key
        _kernels.fill_normals(seed, stream, np.int64(self.position), out)
        self.position += n
        return out

    def normal(self) -> float:
        return float(self.normals(1)[0])
