"""Monte Carlo measurement of identification errors and sensing distortion.

Trials run in fixed-size batches.  Batch ``b`` draws all of its randomness
from ``Generator(PCG64(SeedSequence(seed).spawn(num_batches)[b]))`` in this
order: true identities, wrong identities, CR-phase inputs (randomized mode),
CR-phase channel, color-phase channel.  Results therefore depend only on
``(spec, code, plan)``, never on how batches are scheduled.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binomtest

from .channel import SdMacSpec, sample_uses
from .estimator import InputModel, optimal_estimator
from .idf_code.code import DETERMINISTIC, IdfCode

#: Root seed used when none is given.
DEFAULT_SEED = 2024
IDENTITY_RULES = ("random", "fixed", "pairs")
_MAX_PAIRS = 32
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class TrialPlan:
    """How many trials to run and how identities are drawn.

    ``identities``: ``"random"`` draws true identities uniformly per trial,
    ``"fixed"`` uses ``fixed`` for every trial; both test one uniformly drawn
    wrong identity per sender.  ``"pairs"`` draws true identities uniformly and
    tests every wrong identity (needs ``N_k <= 32``).
    """

    trials: int
    seed: int = DEFAULT_SEED
    identities: str = "random"
    fixed: tuple[int, ...] | None = None
    batch_size: int = 4096

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.identities not in IDENTITY_RULES:
            raise ValueError(f"identities must be one of {IDENTITY_RULES}")
        if self.identities == "fixed" and self.fixed is None:
            raise ValueError("identities='fixed' needs a fixed identity tuple")

    def batches(self):
        """Sizes and generators of the trial batches."""
        count = math.ceil(self.trials / self.batch_size)
        children = np.random.SeedSequence(self.seed).spawn(count)
        for b, child in enumerate(children):
            size = min(self.batch_size, self.trials - b * self.batch_size)
            yield size, np.random.Generator(np.random.PCG64(child))


@dataclass(frozen=True)
class Proportion:
    count: int
    total: int
    estimate: float | None
    ci_low: float | None
    ci_high: float | None

    @classmethod
    def wilson(cls, count: int, total: int) -> "Proportion":
        if total == 0:
            return cls(0, 0, None, None, None)
        ci = binomtest(int(count), int(total)).proportion_ci(confidence_level=0.95, method="wilson")
        return cls(int(count), int(total), count / total, float(ci.low), float(ci.high))

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


@dataclass(frozen=True)
class SenderStats:
    sender: int
    budget: float
    type1: Proportion
    type2: Proportion
    distortion: float
    distortion_se: float
    distortion_ci: tuple[float, float]
    cr_failure_rate: float
    color_decode_failure_rate: float
    color_error_rate: float


@dataclass(frozen=True)
class ErrorStats:
    trials: int
    seed: int
    identities: str
    m: int
    senders: tuple[SenderStats, ...]
    trace: np.ndarray = field(repr=False)  # [t, k] mean distortion per channel use

    def to_dict(self) -> dict:
        d = {
            "trials": self.trials,
            "seed": self.seed,
            "identities": self.identities,
            "m": self.m,
            "senders": [asdict(s) for s in self.senders],
        }
        for s in d["senders"]:
            s["distortion_ci"] = list(s["distortion_ci"])
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in self.senders:
            w.writerow(
                [
                    s.sender,
                    _fmt(s.type1.estimate),
                    _fmt(s.type1.ci_low),
                    _fmt(s.type1.ci_high),
                    _fmt(s.type2.estimate),
                    _fmt(s.type2.ci_low),
                    _fmt(s.type2.ci_high),
                    _fmt(s.distortion),
                    _fmt(s.distortion_se),
                    _fmt(s.budget),
                    _fmt(s.cr_failure_rate),
                    _fmt(s.color_decode_failure_rate),
                    _fmt(s.color_error_rate),
                ]
            )
        return out.getvalue()


CSV_HEADER = [
    "k",
    "type1",
    "type1_low",
    "type1_high",
    "type2",
    "type2_low",
    "type2_high",
    "distortion",
    "distortion_se",
    "budget",
    "cr_failure_rate",
    "color_decode_failure_rate",
    "color_error_rate",
]


def _fmt(v) -> str:
    return "" if v is None else f"{v:.9g}"


@dataclass
class _Tally:
    K: int
    m: int
    trials: int = 0
    type1: np.ndarray = None
    type2: np.ndarray = None
    type2_total: np.ndarray = None
    color_error: np.ndarray = None
    cr_failures: int = 0
    decode_failures: int = 0
    dist_sum: np.ndarray = None
    dist_sq: np.ndarray = None
    trace: np.ndarray = None

    def __post_init__(self):
        self.type1 = np.zeros(self.K, dtype=np.int64)
        self.type2 = np.zeros(self.K, dtype=np.int64)
        self.type2_total = np.zeros(self.K, dtype=np.int64)
        self.color_error = np.zeros(self.K, dtype=np.int64)
        self.dist_sum = np.zeros(self.K)
        self.dist_sq = np.zeros(self.K)
        self.trace = np.zeros((self.m, self.K))


class _Tables:
    """Estimator lookup tables for both phases, shared by all trials."""

    def __init__(self, spec: SdMacSpec, code: IdfCode):
        K = spec.num_senders
        if code.mode == DETERMINISTIC:
            cr_model = InputModel.point(spec, code.cr_symbol)
        else:
            cr_model = InputModel.product(spec, code.cr_dist)
        self.cr = [optimal_estimator(spec, cr_model, k).s_hat for k in range(K)]
        # color phase: the estimator for the joint symbol actually on the channel
        tuples = list(spec.input_tuples())
        self.joint = [
            np.stack([optimal_estimator(spec, InputModel.point(spec, x), k).s_hat[x[k]] for x in tuples])
            for k in range(K)
        ]  # [k][flat x, y]
        self.distortion = spec.distortion


def _sample_wrong(rng, true_ids: np.ndarray, N: int) -> np.ndarray:
    if N < 2:
        return np.full_like(true_ids, -1)
    return (true_ids + 1 + rng.integers(N - 1, size=true_ids.shape)) % N


def _simulate(spec: SdMacSpec, code: IdfCode, plan: TrialPlan) -> _Tally:
    K, n, m = spec.num_senders, code.n, code.m
    N = code.num_identities
    if plan.identities == "pairs" and max(N) > _MAX_PAIRS:
        raise ValueError(f"identities='pairs' needs N_k <= {_MAX_PAIRS}, got {N}")
    if plan.identities == "fixed":
        fixed = tuple(code.check_identity(k, i) for k, i in enumerate(plan.fixed))
    tables = _Tables(spec, code)
    books = code.transmission.codebooks
    tally = _Tally(K, m)

    for B, rng in plan.batches():
        if plan.identities == "fixed":
            ids = np.tile(np.array(fixed, dtype=np.int64), (B, 1))
        else:
            ids = np.stack([rng.integers(N[k], size=B) for k in range(K)], axis=1)
        wrong = None
        if plan.identities != "pairs":
            wrong = np.stack([_sample_wrong(rng, ids[:, k], N[k]) for k in range(K)], axis=1)

        if code.mode == DETERMINISTIC:
            x_cr = np.broadcast_to(np.array(code.cr_symbol), (B, n, K))
        else:
            x_cr = np.stack(
                [
                    np.minimum(np.searchsorted(np.cumsum(p), rng.random((B, n)), side="right"), p.size - 1)
                    for p in code.cr_dist
                ],
                axis=-1,
            )
        s_cr, y_cr = sample_uses(spec, x_cr, rng)
        typical = code.typicality.check_batch(y_cr)

        colors = np.stack([code.colors_batch(k, ids[:, k], y_cr) for k in range(K)], axis=1)
        x_cw = np.stack([books[k][colors[:, k]] for k in range(K)], axis=-1)  # (B, n', K)
        x_cw[~typical] = np.array(code.fallback)
        s_cw, y_cw = sample_uses(spec, x_cw, rng)
        decoded = code.transmission.decode_batch(y_cw)
        decoded_ok = decoded[:, 0] >= 0
        usable = typical & decoded_ok

        tally.trials += B
        tally.cr_failures += int((~typical).sum())
        tally.decode_failures += int((typical & ~decoded_ok).sum())
        for k in range(K):
            hit = usable & (decoded[:, k] == colors[:, k])
            tally.type1[k] += int((~hit).sum())
            tally.color_error[k] += int((usable & ~hit).sum() + (typical & ~decoded_ok).sum())
            if N[k] < 2:
                continue
            if wrong is not None:
                wc = code.colors_batch(k, wrong[:, k], y_cr)
                tally.type2[k] += int((usable & (decoded[:, k] == wc)).sum())
                tally.type2_total[k] += B
            else:
                for shift in range(1, N[k]):
                    wc = code.colors_batch(k, (ids[:, k] + shift) % N[k], y_cr)
                    tally.type2[k] += int((usable & (decoded[:, k] == wc)).sum())
                    tally.type2_total[k] += B

        # per-use distortion of each sender's optimal estimate
        x_flat = np.ravel_multi_index(tuple(np.moveaxis(x_cw, -1, 0)), spec.input_alphabets)
        for k in range(K):
            d = tables.distortion[k]
            est_cr = tables.cr[k][x_cr[..., k], y_cr]
            est_cw = tables.joint[k][x_flat, y_cw]
            per_use = np.concatenate([d[s_cr[..., k], est_cr], d[s_cw[..., k], est_cw]], axis=1)  # (B, m)
            per_trial = per_use.mean(axis=1)
            tally.dist_sum[k] += per_trial.sum()
            tally.dist_sq[k] += (per_trial**2).sum()
            tally.trace[:, k] += per_use.sum(axis=0)
    return tally


def run_trials(spec: SdMacSpec, code: IdfCode, plan: TrialPlan) -> ErrorStats:
    """Measure type I/II error rates and per-sender distortion of ``code``."""
    tally = _simulate(spec, code, plan)
    T = tally.trials
    senders = []
    for k in range(spec.num_senders):
        mean = tally.dist_sum[k] / T
        var = max(tally.dist_sq[k] / T - mean**2, 0.0) * T / (T - 1) if T > 1 else 0.0
        se = math.sqrt(var / T)
        senders.append(
            SenderStats(
                sender=k,
                budget=code.budget[k],
                type1=Proportion.wilson(tally.type1[k], T),
                type2=Proportion.wilson(tally.type2[k], tally.type2_total[k]),
                distortion=float(mean),
                distortion_se=se,
                distortion_ci=(float(mean - _Z95 * se), float(mean + _Z95 * se)),
                cr_failure_rate=tally.cr_failures / T,
                color_decode_failure_rate=tally.decode_failures / T,
                color_error_rate=int(tally.color_error[k]) / T,
            )
        )
    return ErrorStats(T, plan.seed, plan.identities, code.m, tuple(senders), tally.trace / T)


def distortion_trace(spec: SdMacSpec, code: IdfCode, plan: TrialPlan) -> np.ndarray:
    """Mean distortion per channel use, shape ``(m, K)``; its column means equal the run's ``d_hat``."""
    tally = _simulate(spec, code, plan)
    return tally.trace / tally.trials


__all__ = [
    "CSV_HEADER",
    "DEFAULT_SEED",
    "ErrorStats",
    "Proportion",
    "SenderStats",
    "TrialPlan",
    "distortion_trace",
    "run_trials",
]
