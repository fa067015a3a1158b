"""Two-sender binary adder with multiplicative Bernoulli states.

``Y = X_1 S_1 xor X_2 S_2`` with ``S_1, S_2`` i.i.d. ``Ber(p_S)`` and Hamming
distortion for both senders.  Sender k only learns about its state when it
sends ``x_k = 1``; the output is then as noisy as the other sender's product
``X_j S_j``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .channel import SdMacSpec, hamming, product_state_dist
from .estimator import InputModel, symbol_distortion
from .region import (
    DETERMINISTIC,
    OptConfig,
    RegionPoint,
    bound,
    deterministic_bound,
    entropy_bits,
    unconstrained_bound,
)


@dataclass(frozen=True)
class BinaryAdderParams:
    p_s: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError(f"p_s must lie in [0, 1], got {self.p_s}")


def build(params: BinaryAdderParams = BinaryAdderParams()) -> SdMacSpec:
    p = params.p_s
    kernel = np.zeros((2, 2, 2, 2, 2))
    for x1, x2, s1, s2 in np.ndindex(2, 2, 2, 2):
        kernel[x1, x2, s1, s2, (x1 * s1) ^ (x2 * s2)] = 1.0
    marg = [1 - p, p]
    return SdMacSpec(
        num_senders=2,
        input_alphabets=(2, 2),
        state_alphabets=(2, 2),
        output_alphabet=2,
        kernel=kernel,
        state_dist=product_state_dist([marg, marg]),
        distortion=(hamming(2), hamming(2)),
    )


def h2(p: float) -> float:
    return float(entropy_bits([p, 1 - p]))


def extreme_points_closed_form(params: BinaryAdderParams):
    """Closed-form extreme points ``(d_1, d_2, rate)`` for ``x = (0,1), (1,0), (1,1)``."""
    p = params.p_s
    m = min(p, 1 - p)
    return [(m, 0.0, h2(p)), (0.0, m, h2(p)), (p, p, h2(2 * p * (1 - p)))]


EXTREME_INPUTS = ((0, 1), (1, 0), (1, 1))


def extreme_point(spec: SdMacSpec, x) -> RegionPoint:
    """Rate and distortions of a fixed symbol tuple, recomputed through the pipeline.

    Both senders' minimal distortions are measured with the optimal
    estimators; the deterministic bound is then asked for the best rate under
    exactly those budgets.
    """
    model = InputModel.point(spec, x)
    d = tuple(symbol_distortion(spec, model, k, x[k]) for k in range(spec.num_senders))
    point = deterministic_bound(spec, d)
    notes = dict(point.notes, row=tuple(x))
    return RegionPoint(DETERMINISTIC, d, True, point.rate, point.achiever, point.distortions, notes)


def extreme_points(params: BinaryAdderParams = BinaryAdderParams()) -> list[RegionPoint]:
    """Extreme points for ``x = (0,1), (1,0), (1,1)``."""
    spec = build(params)
    return [extreme_point(spec, x) for x in EXTREME_INPUTS]


SWEEP_HEADER = ["D", "rate_joint_rand", "rate_joint_det", "rate_separation", "rate_unconstrained", "feasible"]


@dataclass(frozen=True)
class SweepRow:
    budget: tuple[float, float]
    randomized: RegionPoint
    deterministic: RegionPoint
    separation: RegionPoint
    unconstrained: float

    @property
    def feasible(self) -> bool:
        return self.randomized.feasible


def budget_sweep(
    params: BinaryAdderParams = BinaryAdderParams(),
    grid=None,
    mode: str = "diagonal",
    cfg: OptConfig | None = None,
) -> list[SweepRow]:
    """Joint (randomized, deterministic) and separation rates over a budget grid.

    ``mode="diagonal"`` sweeps ``D_1 = D_2`` over ``grid``; ``mode="2d"`` sweeps
    the full product ``grid x grid``.
    """
    spec = build(params)
    if grid is None:
        grid = np.linspace(0.0, max(params.p_s, 1e-12), 33)
    grid = [float(g) for g in grid]
    if mode == "diagonal":
        budgets = [(g, g) for g in grid]
    elif mode == "2d":
        budgets = [(a, b) for a in grid for b in grid]
    else:
        raise ValueError(f"mode must be 'diagonal' or '2d', got {mode!r}")
    ref = unconstrained_bound(spec, cfg)
    rows = []
    for D in budgets:
        rows.append(
            SweepRow(
                D,
                bound(spec, D, "randomized", cfg),
                bound(spec, D, "deterministic", cfg),
                bound(spec, D, "separation", cfg, ref),
                ref.rate,
            )
        )
    return rows


def _rate(point: RegionPoint) -> str:
    return f"{point.rate:.9g}" if point.feasible else ""


def sweep_csv(rows, mode: str = "diagonal") -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        D = f"{r.budget[0]:.9g}" if mode == "diagonal" else f"{r.budget[0]:.9g};{r.budget[1]:.9g}"
        w.writerow(
            [
                D,
                _rate(r.randomized),
                _rate(r.deterministic),
                _rate(r.separation),
                f"{r.unconstrained:.9g}",
                "true" if r.feasible else "false",
            ]
        )
    return out.getvalue()


# public names kept for existing callers
table1 = extreme_points
fig2_data = budget_sweep

__all__ = [
    "BinaryAdderParams",
    "EXTREME_INPUTS",
    "SWEEP_HEADER",
    "SweepRow",
    "budget_sweep",
    "build",
    "extreme_point",
    "extreme_points",
    "extreme_points_closed_form",
    "fig2_data",
    "h2",
    "sweep_csv",
    "table1",
]
