"""Letter-typicality test on the common-randomness block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import IndexOutOfAlphabet, LengthMismatch

# absorbs rounding in n * Q(y) so that boundary counts are decided consistently
_COUNT_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class TypicalityTest:
    """``y^n`` is typical iff ``|count(y) / n - Q(y)| <= eps`` for every letter ``y``.

    The comparison is done on counts, ``|count(y) - n Q(y)| <= n eps``.
    """

    n: int
    reference: np.ndarray
    eps: float

    def __post_init__(self):
        ref = np.array(self.reference, dtype=float)
        if ref.ndim != 1 or (ref < 0).any() or abs(ref.sum() - 1.0) > 1e-9:
            raise ValueError("reference must be a probability vector")
        if self.n < 1 or self.eps < 0:
            raise ValueError("need n >= 1 and eps >= 0")
        ref.setflags(write=False)
        object.__setattr__(self, "reference", ref)

    @property
    def alphabet(self) -> int:
        return self.reference.size

    def counts(self, y) -> np.ndarray:
        """Letter counts along the last axis of ``y`` (shape ``(..., n)``)."""
        y = np.asarray(y, dtype=np.int64)
        if y.shape[-1] != self.n:
            raise LengthMismatch(f"expected {self.n} symbols, got {y.shape[-1]}")
        if ((y < 0) | (y >= self.alphabet)).any():
            raise IndexOutOfAlphabet(f"output symbol outside alphabet of size {self.alphabet}")
        return (y[..., None] == np.arange(self.alphabet)).sum(axis=-2)

    def check_batch(self, y) -> np.ndarray:
        dev = np.abs(self.counts(y) - self.n * self.reference)
        return (dev <= self.n * self.eps + _COUNT_SLACK).all(axis=-1)

    def contains(self, y) -> bool:
        return bool(self.check_batch(np.asarray(y)[None, :])[0])

    def lower_bound(self) -> float:
        """Union/Hoeffding-style floor ``1 - 2|Y| exp(-2 n eps^2 min_y Q(y)^2)`` on ``P(typical)``."""
        qmin = self.reference.min()
        return 1.0 - 2 * self.alphabet * float(np.exp(-2 * self.n * self.eps**2 * qmin**2))
