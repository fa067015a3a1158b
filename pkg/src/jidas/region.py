"""Lower bounds on the identification capacity-distortion region.

Three bound kinds are computed for a distortion budget ``D = (D_1..D_K)``:

* ``deterministic``: best output entropy ``H(W_avg(. | x))`` over joint input
  symbols whose per-sender minimal distortions meet ``D``;
* ``randomized``: best output entropy ``H(P W_avg)`` over product input
  distributions whose per-sender minimal distortions meet ``D``;
* ``separation``: time sharing between unconstrained identification and
  pure sensing.

The bound is a single rate shared by every sender.  All three assume that
every sender can transmit at a positive rate; this is not checked.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr

from .channel import SdMacSpec, average_channel, check
from .errors import InfeasibleDistortion
from .estimator import point_mass_distortions, symbol_distortions

DETERMINISTIC = "deterministic"
RANDOMIZED = "randomized"
SEPARATION = "separation"
KINDS = (DETERMINISTIC, RANDOMIZED, SEPARATION)
_ALIASES = {"det": DETERMINISTIC, "rand": RANDOMIZED, "sep": SEPARATION}

#: Slack allowed when comparing a distortion against its budget.
ADMISSIBILITY_TOL = 1e-12

POSITIVE_RATE_NOTE = "assumes every sender can transmit at a positive rate (not verified)"
SEPARATION_NOTE = "separation baseline is a time-sharing reconstruction"


def kind_name(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown bound kind {kind!r}; expected one of {KINDS} or det/rand/sep")
    return kind


def entropy_bits(p, axis=-1):
    """Shannon entropy in bits along ``axis`` (``0 log 0 = 0``)."""
    return entr(np.asarray(p, dtype=float)).sum(axis=axis) / math.log(2)


@dataclass(frozen=True)
class OptConfig:
    """Search settings for the randomized bound.

    ``grid`` is the step of the exhaustive coarse lattice; it is coarsened by
    powers of two whenever the product lattice would exceed
    ``max_grid_points``.  Refinement then runs on lattices of step
    ``grid/2, grid/4, ...`` down to ``refine``.
    """

    grid: float = 1 / 64
    refine: float = 1 / 1024
    max_rounds: int = 100
    tol: float = 1e-9
    max_grid_points: int = 300_000
    max_neighbourhood: int = 20_000
    chunk: int = 32_768


@dataclass(frozen=True, eq=False)
class RegionPoint:
    kind: str
    budget: tuple[float, ...]
    feasible: bool
    rate: float | None = None
    achiever: tuple | None = None
    distortions: tuple[float, ...] | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feasible and (self.rate is None or self.rate < 0):
            raise ValueError("a feasible point needs a nonnegative rate")
        if not self.feasible and self.achiever is not None:
            raise ValueError("an infeasible point has no achiever")

    @property
    def is_symbol(self) -> bool:
        return self.achiever is not None and all(np.ndim(a) == 0 for a in self.achiever)

    def achiever_str(self) -> str:
        if self.achiever is None:
            return ""
        if self.is_symbol:
            return "x=(" + ",".join(str(int(a)) for a in self.achiever) + ")"
        return ";".join(
            f"P_{k + 1}=[" + ",".join(f"{v:.9g}" for v in p) + "]" for k, p in enumerate(self.achiever)
        )


def _budget(spec: SdMacSpec, D) -> np.ndarray:
    D = np.broadcast_to(np.asarray(D, dtype=float), (spec.num_senders,)).copy()
    if np.isnan(D).any():
        raise ValueError("distortion budget contains NaN")
    return D


def _infeasible(kind, D, message, **notes):
    notes = {"reason": message, **notes}
    return RegionPoint(kind, tuple(float(d) for d in D), False, notes=notes)


# -- deterministic bound ------------------------------------------------------


def admissible_tuples(spec: SdMacSpec, D) -> np.ndarray:
    """Boolean array over joint inputs: every ``d*_k`` within budget."""
    D = _budget(spec, D)
    dist = point_mass_distortions(spec)
    ok = dist <= D.reshape((-1,) + (1,) * spec.num_senders) + ADMISSIBILITY_TOL
    return ok.all(axis=0)


def deterministic_bound(spec: SdMacSpec, D) -> RegionPoint:
    """Best ``H(W_avg(. | x))`` over admissible symbol tuples (ties: lexicographically first)."""
    check(spec)
    D = _budget(spec, D)
    if (D < 0).any():
        raise InfeasibleDistortion(f"negative distortion budget {tuple(D)}")
    ok = admissible_tuples(spec, D)
    if not ok.any():
        raise InfeasibleDistortion(f"no input symbol tuple meets distortion budget {tuple(D)}")
    rates = entropy_bits(average_channel(spec).table)
    dist = point_mass_distortions(spec)
    best, best_x = -np.inf, None
    for x in spec.input_tuples():
        if ok[x] and rates[x] > best + ADMISSIBILITY_TOL:
            best, best_x = float(rates[x]), x
    return RegionPoint(
        DETERMINISTIC,
        tuple(float(d) for d in D),
        True,
        rate=best,
        achiever=best_x,
        distortions=tuple(float(dist[(k,) + best_x]) for k in range(spec.num_senders)),
        notes={"precondition": POSITIVE_RATE_NOTE},
    )


# -- randomized bound ---------------------------------------------------------


def simplex_lattice(size: int, steps: int) -> np.ndarray:
    """All integer vectors of length ``size`` with entries >= 0 summing to ``steps``."""
    if size == 1:
        return np.array([[steps]])
    bars = np.array(list(itertools.combinations(range(steps + size - 1), size - 1)))
    edges = np.hstack(
        [np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), steps + size - 1)]
    )
    return np.diff(edges, axis=1) - 1


def _lattice_size(size: int, steps: int) -> int:
    return math.comb(steps + size - 1, size - 1)


def _unit_moves(size: int) -> np.ndarray:
    moves = [np.zeros(size, dtype=np.int64)]
    for i, j in itertools.permutations(range(size), 2):
        m = np.zeros(size, dtype=np.int64)
        m[i], m[j] = 1, -1
        moves.append(m)
    return np.array(moves)


def _box(center: np.ndarray, radius: int, steps: int) -> np.ndarray:
    """Lattice points within ``radius`` (per free coordinate) of ``center``."""
    size = center.size
    if size == 1:
        return center[None, :]
    rng = range(-radius, radius + 1)
    offs = np.array(list(itertools.product(rng, repeat=size - 1)), dtype=np.int64)
    pts = np.empty((len(offs), size), dtype=np.int64)
    pts[:, :-1] = center[:-1] + offs
    pts[:, -1] = steps - pts[:, :-1].sum(axis=1)
    return pts[(pts >= 0).all(axis=1)]


class _ProductSearch:
    """Evaluates output entropy and per-sender distortions of product laws."""

    def __init__(self, spec: SdMacSpec, D: np.ndarray, cfg: OptConfig):
        self.spec = spec
        self.D = D
        self.cfg = cfg
        self.K = spec.num_senders
        self.sizes = spec.input_alphabets
        self.avg = average_channel(spec).table
        xs = "abcdefghijklmnopqrstuvw"[: self.K]
        self._out_expr = xs + "Y," + ",".join("Z" + c for c in xs) + "->ZY"

    def evaluate(self, dists):
        """``dists``: list of ``(B, |X_k|)`` arrays.  Returns rates, distortions, feasibility."""
        q = np.einsum(self._out_expr, self.avg, *dists, optimize=True)
        rates = entropy_bits(q)
        dist = np.empty((len(rates), self.K))
        for k in range(self.K):
            per_symbol = symbol_distortions(self.spec, dists, k)
            dist[:, k] = (dists[k] * per_symbol).sum(axis=-1)
        feasible = (dist <= self.D + ADMISSIBILITY_TOL).all(axis=1)
        return rates, dist, feasible

    def best_of(self, counts, steps):
        """Best feasible candidate among ``counts`` (list of ``(B, |X_k|)`` int arrays)."""
        dists = [c / s for c, s in zip(counts, steps)]
        rates, dist, feasible = self.evaluate(dists)
        if not feasible.any():
            return None
        i = int(np.argmax(np.where(feasible, rates, -np.inf)))
        return float(rates[i]), [c[i] for c in counts], dist[i]


def _coarse_steps(spec: SdMacSpec, cfg: OptConfig) -> int:
    steps = max(1, round(1 / cfg.grid))
    while steps > 1 and math.prod(_lattice_size(a, steps) for a in spec.input_alphabets) > cfg.max_grid_points:
        steps //= 2
    return steps


def _exhaustive(search: _ProductSearch, steps: int):
    lattices = [simplex_lattice(a, steps) for a in search.sizes]
    shape = tuple(len(lat) for lat in lattices)
    total = math.prod(shape)
    best = None
    for start in range(0, total, search.cfg.chunk):
        idx = np.unravel_index(np.arange(start, min(start + search.cfg.chunk, total)), shape)
        found = search.best_of([lat[i] for lat, i in zip(lattices, idx)], [steps] * search.K)
        if found is not None and (best is None or found[0] > best[0]):
            best = found
    return best


def _refine(search: _ProductSearch, best, steps_from: int, steps_to: int):
    """Alternating per-sender ascent plus joint unit-move search on finer lattices."""
    cfg = search.cfg
    value, counts, dist = best
    levels = []
    s = steps_from
    while s * 2 <= steps_to:
        s *= 2
        levels.append(s)
    if steps_to not in levels and steps_to > steps_from:
        levels.append(steps_to)
    steps = steps_from
    moves = [_unit_moves(a) for a in search.sizes]
    joint_moves = math.prod(len(m) for m in moves)
    for level in levels:
        if level % steps == 0:
            counts = [c * (level // steps) for c in counts]
        else:
            counts = [_round_to_lattice(c / steps, level) for c in counts]
        steps = level
        for _ in range(cfg.max_rounds):
            before = value
            for k in range(search.K):
                size = search.sizes[k]
                if _lattice_size(size, steps) <= cfg.max_neighbourhood:
                    cand = simplex_lattice(size, steps)
                else:
                    radius = max(1, int((cfg.max_neighbourhood ** (1 / (size - 1)) - 1) // 2))
                    cand = _box(counts[k], radius, steps)
                trial = [np.broadcast_to(c, (len(cand), c.size)) for c in counts]
                trial[k] = cand
                found = search.best_of(trial, [steps] * search.K)
                if found is not None and found[0] > value:
                    value, counts, dist = found
            if joint_moves <= cfg.max_neighbourhood:
                for _ in range(cfg.max_rounds):
                    combo = itertools.product(*(range(len(m)) for m in moves))
                    idx = np.array(list(combo)).T
                    trial = [counts[k] + moves[k][idx[k]] for k in range(search.K)]
                    keep = np.all([(t >= 0).all(axis=1) for t in trial], axis=0)
                    trial = [t[keep] for t in trial]
                    found = search.best_of(trial, [steps] * search.K)
                    if found is None or found[0] <= value:
                        break
                    value, counts, dist = found
            if value - before < cfg.tol:
                break
    return (value, counts, dist), steps


def _round_to_lattice(p: np.ndarray, steps: int) -> np.ndarray:
    c = np.floor(p * steps + 1e-9).astype(np.int64)
    short = steps - c.sum()
    order = np.argsort(-(p * steps - c), kind="stable")
    c[order[:short]] += 1
    return c


def randomized_bound(spec: SdMacSpec, D, cfg: OptConfig | None = None) -> RegionPoint:
    """Best ``H(P W_avg)`` over product laws ``P`` with ``d*_k(P_k) <= D_k``.

    The exhaustive coarse lattice gives a value that is attained by a
    feasible law; refinement only ever replaces it by a better feasible law.
    """
    cfg = cfg or OptConfig()
    check(spec)
    D = _budget(spec, D)
    if (D < 0).any():
        raise InfeasibleDistortion(f"negative distortion budget {tuple(D)}")
    search = _ProductSearch(spec, D, cfg)
    coarse = _coarse_steps(spec, cfg)
    best = _exhaustive(search, coarse)
    if best is None:
        raise InfeasibleDistortion(
            f"no product input distribution on the 1/{coarse} lattice meets distortion budget {tuple(D)}"
        )
    coarse_value = best[0]
    fine = max(coarse, round(1 / cfg.refine))
    (value, counts, dist), steps = _refine(search, best, coarse, fine)
    achiever = tuple(np.asarray(c, dtype=float) / steps for c in counts)
    return RegionPoint(
        RANDOMIZED,
        tuple(float(d) for d in D),
        True,
        rate=float(value),
        achiever=achiever,
        distortions=tuple(float(v) for v in dist),
        notes={
            "precondition": POSITIVE_RATE_NOTE,
            "coarse_grid": f"1/{coarse}",
            "coarse_rate": coarse_value,
            "final_grid": f"1/{steps}",
        },
    )


def unconstrained_bound(spec: SdMacSpec, cfg: OptConfig | None = None) -> RegionPoint:
    """Randomized bound without a distortion constraint (capacity without sensing)."""
    return randomized_bound(spec, np.full(spec.num_senders, np.inf), cfg)


# -- separation baseline ------------------------------------------------------


def separation_baseline(
    spec: SdMacSpec, D, cfg: OptConfig | None = None, unconstrained: RegionPoint | None = None
) -> RegionPoint:
    """Time sharing: a fraction ``alpha`` identifies at the unconstrained optimum,
    the rest senses at each sender's minimal symbol distortion."""
    check(spec)
    D = _budget(spec, D)
    ident = unconstrained or unconstrained_bound(spec, cfg)
    d_id = np.array(ident.distortions)
    pm = point_mass_distortions(spec)
    K = spec.num_senders
    flat = pm.reshape(K, -1)
    d_min = flat.min(axis=1)
    sensing = tuple(
        tuple(int(v) for v in np.unravel_index(int(np.argmin(flat[k])), spec.input_alphabets))
        for k in range(K)
    )
    if (D < d_min - ADMISSIBILITY_TOL).any():
        raise InfeasibleDistortion(
            f"budget {tuple(D)} below the minimal sensing distortions {tuple(d_min)}"
        )
    alpha = 1.0
    for k in range(K):
        gap = d_id[k] - d_min[k]
        if gap > 0:
            alpha = min(alpha, max(0.0, (D[k] - d_min[k]) / gap))
    return RegionPoint(
        SEPARATION,
        tuple(float(d) for d in D),
        True,
        rate=alpha * ident.rate,
        achiever=ident.achiever,
        distortions=tuple(float(alpha * d_id[k] + (1 - alpha) * d_min[k]) for k in range(K)),
        notes={
            "precondition": POSITIVE_RATE_NOTE,
            "reconstruction": SEPARATION_NOTE,
            "alpha": alpha,
            "sensing_tuples": sensing,
        },
    )


# -- sweeps -------------------------------------------------------------------


def bound(spec: SdMacSpec, D, kind: str, cfg: OptConfig | None = None, unconstrained=None) -> RegionPoint:
    """Dispatch one bound; infeasibility is returned as a point, not raised."""
    kind = kind_name(kind)
    try:
        if kind == DETERMINISTIC:
            return deterministic_bound(spec, D)
        if kind == RANDOMIZED:
            return randomized_bound(spec, D, cfg)
        return separation_baseline(spec, D, cfg, unconstrained)
    except InfeasibleDistortion as exc:
        return _infeasible(kind, _budget(spec, D), str(exc))


def region_sweep(spec: SdMacSpec, D_grid, kinds=KINDS, cfg: OptConfig | None = None) -> list[RegionPoint]:
    """One point per ``(D, kind)``, grid order outermost."""
    kinds = [kind_name(k) for k in kinds]
    points = []
    unconstrained = None
    for D in D_grid:
        for kind in kinds:
            if kind == SEPARATION and unconstrained is None:
                unconstrained = unconstrained_bound(spec, cfg)
            points.append(bound(spec, D, kind, cfg, unconstrained))
    return points


def region_csv(points, num_senders: int | None = None) -> str:
    if num_senders is None:
        num_senders = len(points[0].budget) if points else 1
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["kind"] + [f"D_{k + 1}" for k in range(num_senders)] + ["feasible", "rate", "achiever"])
    for p in points:
        w.writerow(
            [p.kind]
            + [f"{d:.9g}" for d in p.budget]
            + ["true" if p.feasible else "false", "" if p.rate is None else f"{p.rate:.9g}", p.achiever_str()]
        )
    return out.getvalue()


__all__ = [
    "ADMISSIBILITY_TOL",
    "DETERMINISTIC",
    "KINDS",
    "OptConfig",
    "RANDOMIZED",
    "RegionPoint",
    "SEPARATION",
    "admissible_tuples",
    "bound",
    "deterministic_bound",
    "entropy_bits",
    "kind_name",
    "randomized_bound",
    "region_csv",
    "region_sweep",
    "separation_baseline",
    "simplex_lattice",
    "unconstrained_bound",
]
