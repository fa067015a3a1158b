"""Assembly and execution of the identification-with-feedback code.

A block of ``m = n + n'`` channel uses, ``n' = ceil(sqrt(n))``:

1. common-randomness phase (``t <= n``): every sender sends a fixed symbol
   ``x*_k`` (deterministic mode) or i.i.d. samples of ``P*_k`` (randomized
   mode), and all parties see ``y^n`` through the feedback link;
2. if ``y^n`` is typical, sender k sends its color ``F_{k,i_k}(y^n)`` with the
   color-transmission code; otherwise every sender falls back to its part of
   the distortion-minimizing admissible symbol tuple.

The receiver, asked about identities ``j``, accepts sender k iff ``y^n`` is
typical and the decoded color of sender k equals ``F_{k,j_k}(y^n)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..channel import SdMacSpec, average_channel, check
from ..errors import IndexOutOfAlphabet, InfeasibleDistortion, LengthMismatch
from ..estimator import InputModel, distribution_distortion, point_mass_distortions
from ..region import (
    ADMISSIBILITY_TOL,
    OptConfig,
    admissible_tuples,
    deterministic_bound,
    randomized_bound,
)
from .coloring import ColoringFunction, colors_batch
from .transmission import ColorTransmissionCode, greedy_transmission_code
from .typicality import TypicalityTest

DETERMINISTIC = "deterministic"
RANDOMIZED = "randomized"
_MODES = {"det": DETERMINISTIC, "rand": RANDOMIZED, DETERMINISTIC: DETERMINISTIC, RANDOMIZED: RANDOMIZED}

CR_FAILURE = "CRFailure"
COLOR_DECODE_FAILURE = "ColorDecodeFailure"


def mode_name(mode: str) -> str:
    try:
        return _MODES[mode]
    except KeyError:
        raise ValueError(f"mode must be deterministic/det or randomized/rand, got {mode!r}") from None


def color_block_length(n: int) -> int:
    """``ceil(sqrt(n))`` computed exactly."""
    return math.isqrt(n - 1) + 1 if n > 0 else 0


def select_cr_input(spec: SdMacSpec, D, mode: str = DETERMINISTIC, cfg: OptConfig | None = None):
    """Input of the common-randomness phase: ``x*`` (a symbol tuple) or ``P*`` (a tuple of vectors)."""
    if mode_name(mode) == DETERMINISTIC:
        return deterministic_bound(spec, D).achiever
    return randomized_bound(spec, D, cfg).achiever


def fallback_tuple(spec: SdMacSpec, D) -> tuple[int, ...]:
    """Admissible symbol tuple with the smallest total distortion (ties: lexicographically first)."""
    ok = admissible_tuples(spec, D)
    total = point_mass_distortions(spec).sum(axis=0)
    best, best_x = np.inf, None
    for x in spec.input_tuples():
        if ok[x] and total[x] < best - ADMISSIBILITY_TOL:
            best, best_x = total[x], x
    if best_x is None:
        raise InfeasibleDistortion(f"no input symbol tuple meets distortion budget {tuple(D)}")
    return best_x


@dataclass(frozen=True, eq=False)
class IdfCode:
    spec: SdMacSpec = field(repr=False)
    mode: str
    budget: tuple[float, ...]
    n: int
    eps: float
    num_colors: tuple[int, ...]
    num_identities: tuple[int, ...]
    seed: int
    cr_symbol: tuple[int, ...] | None
    cr_dist: tuple[np.ndarray, ...] | None
    typicality: TypicalityTest
    transmission: ColorTransmissionCode
    fallback: tuple[int, ...]
    cr_distortion: tuple[float, ...]
    codeword_distortion: np.ndarray = field(repr=False)  # [joint key, k]

    @property
    def num_senders(self) -> int:
        return self.spec.num_senders

    @property
    def n_prime(self) -> int:
        return self.transmission.n_prime

    @property
    def m(self) -> int:
        return self.n + self.n_prime

    def coloring(self, k: int, identity: int) -> ColoringFunction:
        return ColoringFunction(k, int(identity), self.num_colors[k], self.seed)

    def colors_of(self, y_cr, identities) -> tuple[int, ...]:
        return tuple(self.coloring(k, i)(y_cr) for k, i in enumerate(identities))

    def colors_batch(self, k: int, identities, y_cr) -> np.ndarray:
        return colors_batch(self.seed, k, identities, self.num_colors[k], y_cr)

    def check_identity(self, k: int, identity: int) -> int:
        identity = int(identity)
        if not 0 <= identity < self.num_identities[k]:
            raise IndexOutOfAlphabet(f"identity {identity} of sender {k} outside 0..{self.num_identities[k] - 1}")
        return identity

    def scheme_distortion_bound(self) -> np.ndarray:
        """``(n d*_k(CR input) + n' max_l d*_k(c(l))) / m`` per sender."""
        cr = np.asarray(self.cr_distortion)
        worst = self.codeword_distortion.max(axis=0)
        return (self.n * cr + self.n_prime * worst) / self.m

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "budget": list(self.budget),
            "n": self.n,
            "n_prime": self.n_prime,
            "m": self.m,
            "eps": self.eps,
            "num_colors": list(self.num_colors),
            "num_identities": list(self.num_identities),
            "seed": self.seed,
            "cr_symbol": None if self.cr_symbol is None else list(self.cr_symbol),
            "cr_dist": None if self.cr_dist is None else [p.tolist() for p in self.cr_dist],
            "typical_reference": self.typicality.reference.tolist(),
            "fallback": list(self.fallback),
            "cr_distortion": list(self.cr_distortion),
            "codeword_distortion": self.codeword_distortion.tolist(),
            "transmission": self.transmission.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_idf_code(
    spec: SdMacSpec,
    D,
    n: int,
    eps: float,
    M,
    N,
    seed: int,
    mode: str = DETERMINISTIC,
    max_error: float = 0.1,
    cfg: OptConfig | None = None,
) -> IdfCode:
    """Build a code for distortion budget ``D`` with ``M_k`` colors and ``N_k`` identities per sender.

    Raises
    ------
    InfeasibleDistortion
        No admissible input meets ``D``.
    CodePackingFailure
        The color code cannot carry ``prod(M)`` color tuples in ``ceil(sqrt(n))``
        uses at error ``max_error``.
    """
    check(spec)
    mode = mode_name(mode)
    K = spec.num_senders
    D = np.broadcast_to(np.asarray(D, dtype=float), (K,)).copy()
    M = tuple(int(v) for v in np.broadcast_to(M, (K,)))
    N = tuple(int(v) for v in np.broadcast_to(N, (K,)))
    if n < 4:
        raise ValueError("n must be >= 4")
    if min(M) < 1 or min(N) < 1:
        raise ValueError("color counts and identity counts must be >= 1")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        warnings.warn("eps=0: only sequences of the exact reference type are typical", stacklevel=2)

    avg = average_channel(spec)
    pm = point_mass_distortions(spec)
    cr = select_cr_input(spec, D, mode, cfg)
    if mode == DETERMINISTIC:
        cr_symbol, cr_dist = tuple(int(v) for v in cr), None
        reference = avg.row(cr_symbol)
        cr_distortion = tuple(float(pm[(k,) + cr_symbol]) for k in range(K))
    else:
        cr_symbol, cr_dist = None, tuple(np.asarray(p, dtype=float) for p in cr)
        model = InputModel.product(spec, cr_dist)
        reference = np.einsum(
            avg.table, list(range(K + 1)), *[a for k, p in enumerate(cr_dist) for a in (p, [k])], [K]
        )
        cr_distortion = tuple(distribution_distortion(spec, model, k, cr_dist[k]) for k in range(K))
    typ = TypicalityTest(n, reference / reference.sum(), float(eps))

    n_prime = color_block_length(n)
    admissible = admissible_tuples(spec, D)
    if not admissible.any():
        raise InfeasibleDistortion(
            f"no input symbol tuple meets distortion budget {tuple(D)}; the color phase has nothing to send"
        )
    code = greedy_transmission_code(avg, n_prime, M, admissible, pm, D, max_error=max_error)
    keys = np.arange(code.num_messages)
    cw_dist = np.empty((code.num_messages, K))
    for key in keys:
        word = code.codeword(code.colors(key))
        for k in range(K):
            cw_dist[key, k] = np.mean([pm[(k,) + tuple(row)] for row in word])
    cw_dist.setflags(write=False)
    return IdfCode(
        spec=spec,
        mode=mode,
        budget=tuple(float(d) for d in D),
        n=int(n),
        eps=float(eps),
        num_colors=M,
        num_identities=N,
        seed=int(seed),
        cr_symbol=cr_symbol,
        cr_dist=cr_dist,
        typicality=typ,
        transmission=code,
        fallback=fallback_tuple(spec, D),
        cr_distortion=cr_distortion,
        codeword_distortion=cw_dist,
    )


@dataclass(frozen=True)
class Emission:
    symbol: int
    cr_failure: bool = False


def encode_step(code: IdfCode, k: int, identity: int, t: int, feedback, rng: np.random.Generator | None = None) -> Emission:
    """Symbol of sender k at time ``t`` (1-based) given the fed-back outputs ``y^{t-1}``."""
    if not 1 <= t <= code.m:
        raise ValueError(f"t must lie in 1..{code.m}, got {t}")
    identity = code.check_identity(k, identity)
    if t <= code.n:
        if code.mode == DETERMINISTIC:
            return Emission(code.cr_symbol[k])
        if rng is None:
            raise ValueError("randomized mode needs an rng")
        p = code.cr_dist[k]
        return Emission(int(min(np.searchsorted(np.cumsum(p), rng.random(), side="right"), p.size - 1)))
    feedback = np.asarray(feedback, dtype=np.int64)
    if feedback.size < code.n:
        raise LengthMismatch(f"need at least {code.n} fed-back outputs at t={t}, got {feedback.size}")
    y_cr = feedback[: code.n]
    if not code.typicality.contains(y_cr):
        return Emission(code.fallback[k], cr_failure=True)
    color = code.coloring(k, identity)(y_cr)
    return Emission(int(code.transmission.codebooks[k][color][t - code.n - 1]))


@dataclass(frozen=True)
class Verdict:
    accepted: tuple[bool, ...]
    diagnostic: str | None
    decoded_colors: tuple[int, ...] | None
    claimed_colors: tuple[int, ...] | None


def decode(code: IdfCode, y, claimed) -> Verdict:
    """Per-sender accept/reject for the claimed identity tuple."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (code.m,):
        raise LengthMismatch(f"expected {code.m} outputs, got {y.size}")
    K = code.num_senders
    claimed = tuple(code.check_identity(k, j) for k, j in enumerate(claimed))
    if len(claimed) != K:
        raise ValueError(f"need {K} claimed identities")
    y_cr = y[: code.n]
    if not code.typicality.contains(y_cr):
        return Verdict((False,) * K, CR_FAILURE, None, None)
    colors = code.colors_of(y_cr, claimed)
    decoded = code.transmission.decode(y[code.n :])
    if decoded is None:
        return Verdict((False,) * K, COLOR_DECODE_FAILURE, None, colors)
    return Verdict(tuple(c == d for c, d in zip(colors, decoded)), None, decoded, colors)


__all__ = [
    "COLOR_DECODE_FAILURE",
    "CR_FAILURE",
    "DETERMINISTIC",
    "Emission",
    "IdfCode",
    "RANDOMIZED",
    "Verdict",
    "build_idf_code",
    "color_block_length",
    "decode",
    "encode_step",
    "fallback_tuple",
    "mode_name",
    "select_cr_input",
]
