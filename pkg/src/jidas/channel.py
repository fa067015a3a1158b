"""State-dependent multiple access channels.

A K-sender channel is described by a kernel ``W(y | x_1..x_K, s_1..s_K)``, a
joint state distribution ``P_S`` over ``S_1 x ... x S_K`` and one distortion
table ``d_k(s, s_hat)`` per sender.  States are drawn independently of the
inputs on every channel use.

Arrays are indexed ``kernel[x_1, ..., x_K, s_1, ..., s_K, y]`` and
``state_dist[s_1, ..., s_K]``; all alphabets are ``0..size-1``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfAlphabet,
    NegativeEntry,
    NonStochasticRow,
)

#: Row-normalisation tolerance for kernels and state distributions.
PROB_TOL = 1e-12


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SdMacSpec:
    """Immutable description of a K-sender state-dependent MAC.

    Construction never validates; call :func:`validate` (or any operation
    that needs a well-formed channel) to check the invariants.
    """

    num_senders: int
    input_alphabets: tuple[int, ...]
    state_alphabets: tuple[int, ...]
    output_alphabet: int
    kernel: np.ndarray
    state_dist: np.ndarray
    distortion: tuple[np.ndarray, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        setattr_ = object.__setattr__
        setattr_(self, "num_senders", int(self.num_senders))
        setattr_(self, "input_alphabets", tuple(int(a) for a in self.input_alphabets))
        setattr_(self, "state_alphabets", tuple(int(a) for a in self.state_alphabets))
        setattr_(self, "output_alphabet", int(self.output_alphabet))
        try:
            setattr_(self, "kernel", _frozen(self.kernel))
            setattr_(self, "state_dist", _frozen(self.state_dist))
            setattr_(self, "distortion", tuple(_frozen(d) for d in self.distortion))
        except ValueError as exc:  # ragged nested lists
            raise DimensionMismatch(f"ragged array in channel description: {exc}") from None

    # -- derived shapes -------------------------------------------------

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.input_alphabets

    @property
    def num_input_tuples(self) -> int:
        return int(np.prod(self.input_alphabets))

    def input_tuples(self):
        """All joint input tuples in lexicographic order."""
        return itertools.product(*(range(a) for a in self.input_alphabets))

    def check_input(self, x) -> tuple[int, ...]:
        x = tuple(int(v) for v in x)
        if len(x) != self.num_senders:
            raise IndexOutOfAlphabet(f"expected {self.num_senders} inputs, got {len(x)}")
        for k, (v, size) in enumerate(zip(x, self.input_alphabets)):
            if not 0 <= v < size:
                raise IndexOutOfAlphabet(f"input {v} of sender {k} outside alphabet of size {size}")
        return x

    def sender_state_kernel(self, k: int) -> np.ndarray:
        """``A_k[x_1..x_K, s_k, y] = sum_{s_-k} P_S(s) W(y | x, s)``.

        The joint law of ``(S_k, Y)`` given the full input tuple; cached.
        """
        key = ("sender_state_kernel", k)
        if key not in self._cache:
            K = self.num_senders
            weighted = self.kernel * self.state_dist.reshape(
                (1,) * K + self.state_dist.shape + (1,)
            )
            other_states = tuple(K + j for j in range(K) if j != k)
            self._cache[key] = _frozen(weighted.sum(axis=other_states))
        return self._cache[key]

    # -- serialisation --------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "num_senders": self.num_senders,
            "input_alphabets": list(self.input_alphabets),
            "state_alphabets": list(self.state_alphabets),
            "output_alphabet": self.output_alphabet,
            "kernel": self.kernel.tolist(),
            "state_dist": self.state_dist.tolist(),
            "distortion": [d.tolist() for d in self.distortion],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SdMacSpec":
        required = (
            "num_senders",
            "input_alphabets",
            "state_alphabets",
            "output_alphabet",
            "kernel",
            "state_dist",
            "distortion",
        )
        missing = [name for name in required if name not in data]
        if missing:
            raise DimensionMismatch(f"channel spec is missing fields: {', '.join(missing)}")
        return cls(**{name: data[name] for name in required})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def load(cls, path) -> "SdMacSpec":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DimensionMismatch(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def dump(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    error: type | None = None
    message: str = "OK"
    index: tuple | None = None

    def raise_for_error(self) -> None:
        if not self.ok:
            raise self.error(self.message, index=self.index)

    def __str__(self):
        return "OK" if self.ok else f"{self.error.code}: {self.message}"


def _first_bad(mask: np.ndarray):
    return tuple(int(i) for i in np.argwhere(mask)[0])


def validate(spec: SdMacSpec) -> ValidationReport:
    """Check every channel invariant; report the first violation found.

    Checks run in the order dimensions, signs, normalisation.
    """
    K = spec.num_senders
    X, S = spec.input_alphabets, spec.state_alphabets

    def fail(err, msg, index=None):
        return ValidationReport(False, err, msg, index)

    if K < 1:
        return fail(DimensionMismatch, "num_senders must be positive")
    if len(X) != K or len(S) != K or len(spec.distortion) != K:
        return fail(
            DimensionMismatch,
            f"num_senders={K} but got {len(X)} input alphabets, {len(S)} state "
            f"alphabets and {len(spec.distortion)} distortion tables",
        )
    if min(X + S + (spec.output_alphabet,)) < 1:
        return fail(DimensionMismatch, "alphabet sizes must be >= 1")
    expected = X + S + (spec.output_alphabet,)
    if spec.kernel.shape != expected:
        return fail(DimensionMismatch, f"kernel has shape {spec.kernel.shape}, expected {expected}")
    if spec.state_dist.shape != S:
        return fail(DimensionMismatch, f"state_dist has shape {spec.state_dist.shape}, expected {S}")
    for k, d in enumerate(spec.distortion):
        if d.shape != (S[k], S[k]):
            return fail(
                DimensionMismatch,
                f"distortion[{k}] has shape {d.shape}, expected {(S[k], S[k])}",
                (k,),
            )

    for name, table in (("kernel", spec.kernel), ("state_dist", spec.state_dist)):
        bad = ~np.isfinite(table) | (table < 0)
        if bad.any():
            idx = _first_bad(bad)
            return fail(NegativeEntry, f"{name}{list(idx)} = {float(table[idx])!r}", idx)
    for k, d in enumerate(spec.distortion):
        bad = ~np.isfinite(d) | (d < 0)
        if bad.any():
            idx = _first_bad(bad)
            return fail(NegativeEntry, f"distortion[{k}]{list(idx)} = {float(d[idx])!r}", (k,) + idx)

    row_sums = spec.kernel.sum(axis=-1)
    bad = np.abs(row_sums - 1.0) > PROB_TOL
    if bad.any():
        idx = _first_bad(bad)
        x, s = idx[:K], idx[K:]
        return fail(
            NonStochasticRow,
            f"kernel row x={x} s={s} sums to {float(row_sums[idx])!r}",
            idx,
        )
    total = spec.state_dist.sum()
    if abs(total - 1.0) > PROB_TOL:
        return fail(NonStochasticRow, f"state_dist sums to {float(total)!r}")
    return ValidationReport(True)


def check(spec: SdMacSpec) -> SdMacSpec:
    """Validate and return ``spec``; raise the first violation."""
    if not spec._cache.get("validated"):
        validate(spec).raise_for_error()
        spec._cache["validated"] = True
    return spec


@dataclass(frozen=True, eq=False)
class AveragedChannel:
    """State-averaged kernel ``W_avg(y | x) = sum_s P_S(s) W(y | x, s)``."""

    table: np.ndarray  # [x_1, ..., x_K, y]
    spec: SdMacSpec = field(repr=False)

    def row(self, x) -> np.ndarray:
        return self.table[tuple(x)]

    @property
    def flat(self) -> np.ndarray:
        """Rows indexed by the row-major flattened input tuple."""
        return self.table.reshape(-1, self.table.shape[-1])

    @property
    def output_alphabet(self) -> int:
        return self.table.shape[-1]

    @property
    def input_alphabets(self) -> tuple[int, ...]:
        return self.table.shape[:-1]


def average_channel(spec: SdMacSpec) -> AveragedChannel:
    if "avg" not in spec._cache:
        check(spec)
        K = spec.num_senders
        # extended precision keeps state-independent rows exact after rounding
        table = np.tensordot(
            spec.kernel.astype(np.longdouble),
            spec.state_dist.astype(np.longdouble),
            axes=(list(range(K, 2 * K)), list(range(K))),
        ).astype(float)
        spec._cache["avg"] = AveragedChannel(_frozen(table), spec)
    return spec._cache["avg"]


def sample_uses(spec: SdMacSpec, x, rng: np.random.Generator):
    """Vectorised channel uses.

    ``x`` is an integer array whose last axis holds the K inputs.  Returns
    ``(s, y)`` with ``s`` shaped like ``x`` (one state per sender) and ``y``
    shaped ``x.shape[:-1]``.  Two uniform draws are consumed per use: one for
    the state tuple, one for the output.
    """
    check(spec)
    x = np.asarray(x, dtype=np.int64)
    K = spec.num_senders
    if x.shape[-1:] != (K,):
        raise IndexOutOfAlphabet(f"last axis must hold {K} inputs, got shape {x.shape}")
    sizes = np.array(spec.input_alphabets)
    if ((x < 0) | (x >= sizes)).any():
        bad = _first_bad((x < 0) | (x >= sizes))
        raise IndexOutOfAlphabet(f"input {int(x[bad])} at {bad} outside alphabet")
    batch = x.shape[:-1]

    state_cdf = np.cumsum(spec.state_dist.ravel())
    s_flat = np.searchsorted(state_cdf, rng.random(batch), side="right")
    s_flat = np.minimum(s_flat, state_cdf.size - 1)
    s = np.stack(np.unravel_index(s_flat, spec.state_alphabets), axis=-1)

    x_flat = np.ravel_multi_index(tuple(np.moveaxis(x, -1, 0)), spec.input_alphabets)
    rows = spec.kernel.reshape(spec.num_input_tuples, state_cdf.size, spec.output_alphabet)
    cdf = np.cumsum(rows, axis=-1)[x_flat, s_flat]
    u = rng.random(batch)
    y = (cdf <= u[..., None]).sum(axis=-1)
    y = np.minimum(y, spec.output_alphabet - 1)
    return s, y


def sample_use(spec: SdMacSpec, x, rng: np.random.Generator):
    """One channel use: ``s ~ P_S``, ``y ~ W(. | x, s)``."""
    x = spec.check_input(x)
    s, y = sample_uses(spec, np.array(x), rng)
    return tuple(int(v) for v in s), int(y)


def hamming(size: int) -> np.ndarray:
    return 1.0 - np.eye(size)


def product_state_dist(marginals) -> np.ndarray:
    out = np.ones(())
    for m in marginals:
        out = np.multiply.outer(out, np.asarray(m, dtype=float))
    return out


__all__ = [
    "AveragedChannel",
    "PROB_TOL",
    "SdMacSpec",
    "ValidationReport",
    "average_channel",
    "check",
    "hamming",
    "product_state_dist",
    "sample_use",
    "sample_uses",
    "validate",
]
