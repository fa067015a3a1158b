"""Keyed coloring functions ``F_{k,i}: Y^n -> {0..M-1}``.

A color is ``Mix(seed, k, i, bytes(y^n)) mod M`` where ``Mix`` chains the
splitmix64 finalizer over 64-bit words::

    h = fmix(seed)
    h = fmix(h ^ k)
    h = fmix(h ^ identity)
    h = fmix(h ^ len(y))
    for each 8-byte little-endian word w of bytes(y), zero padded:
        h = fmix(h ^ w)

    fmix(z):  z += 0x9E3779B97F4A7C15
              z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
              return z ^ (z >> 31)

All arithmetic is modulo 2^64 and ``bytes(y)`` holds one byte per symbol.
The scalar and vectorised paths produce identical colors on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z + np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def encode_sequence(y) -> bytes:
    """Canonical byte form of an output sequence: one byte per symbol."""
    y = np.asarray(y, dtype=np.int64)
    if ((y < 0) | (y > 255)).any():
        raise ValueError("symbols must fit in one byte")
    return y.astype(np.uint8).tobytes()


def _words(data: bytes):
    pad = (-len(data)) % 8
    data = data + b"\0" * pad
    return [int.from_bytes(data[i : i + 8], "little") for i in range(0, len(data), 8)]


def mix_hash(seed: int, k: int, identity: int, y) -> int:
    data = encode_sequence(y)
    h = mix64(seed & MASK64)
    for v in (k, identity, len(data)):
        h = mix64(h ^ (v & MASK64))
    for w in _words(data):
        h = mix64(h ^ w)
    return h


def color(seed: int, k: int, identity: int, num_colors: int, y) -> int:
    return mix_hash(seed, k, identity, y) % num_colors


def _sequence_words(y: np.ndarray) -> np.ndarray:
    """``(B, n)`` symbols -> ``(B, ceil(n/8))`` little-endian uint64 words."""
    B, n = y.shape
    pad = (-n) % 8
    raw = np.zeros((B, n + pad), dtype=np.uint8)
    raw[:, :n] = y
    return raw.view("<u8").astype(np.uint64)


def colors_batch(seed: int, k: int, identities, num_colors: int, y) -> np.ndarray:
    """Colors for each row of ``y`` (shape ``(B, n)``) under per-row ``identities``."""
    y = np.asarray(y, dtype=np.int64)
    if ((y < 0) | (y > 255)).any():
        raise ValueError("symbols must fit in one byte")
    B, n = y.shape
    ids = np.broadcast_to(np.asarray(identities, dtype=np.uint64), (B,))
    h = _mix64_array(np.full(B, seed & MASK64, dtype=np.uint64))
    h = _mix64_array(h ^ np.uint64(k & MASK64))
    h = _mix64_array(h ^ ids)
    h = _mix64_array(h ^ np.uint64(n))
    words = _sequence_words(y)
    for j in range(words.shape[1]):
        h = _mix64_array(h ^ words[:, j])
    return (h % np.uint64(num_colors)).astype(np.int64)


@dataclass(frozen=True)
class ColoringFunction:
    sender: int
    identity: int
    num_colors: int
    seed: int

    def __post_init__(self):
        if self.num_colors < 1:
            raise ValueError("num_colors must be >= 1")

    def __call__(self, y) -> int:
        return color(self.seed, self.sender, self.identity, self.num_colors, y)


__all__ = ["ColoringFunction", "color", "colors_batch", "encode_sequence", "mix64", "mix_hash"]
