"""Per-sender state estimation from the sender's own input and the fed-back output.

Sender k observes ``(x_k, y)`` one symbol late and forms ``s_hat = h_k(x_k, y)``.
The posterior ``P(s_k | x_k, y)`` depends on what the *other* senders put into
the channel, so every quantity here is evaluated under an :class:`InputModel`
that fixes a law for each sender (a point mass or a distribution).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .channel import SdMacSpec, check
from .errors import IndexOutOfAlphabet, UndefinedConditional

_LETTERS = "abcdefghijklmnopqrstuvw"
# argmin ties within this absolute slack resolve to the smallest state index
_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class InputModel:
    """Product input law, one probability vector per sender.

    Point masses are stored as one-hot vectors; ``points`` remembers which
    senders were given as fixed symbols.
    """

    dists: tuple[np.ndarray, ...]
    points: tuple[int | None, ...]

    @classmethod
    def of(cls, spec: SdMacSpec, laws) -> "InputModel":
        """Build from a per-sender list of ints (point masses) or vectors."""
        laws = list(laws)
        if len(laws) != spec.num_senders:
            raise ValueError(f"need {spec.num_senders} per-sender laws, got {len(laws)}")
        dists, points = [], []
        for k, (law, size) in enumerate(zip(laws, spec.input_alphabets)):
            if np.ndim(law) == 0:
                x = int(law)
                if not 0 <= x < size:
                    raise IndexOutOfAlphabet(f"input {x} of sender {k} outside alphabet of size {size}")
                vec = np.zeros(size)
                vec[x] = 1.0
                points.append(x)
            else:
                vec = np.asarray(law, dtype=float)
                if vec.shape != (size,):
                    raise ValueError(f"sender {k}: distribution of shape {vec.shape}, expected ({size},)")
                if (vec < 0).any() or abs(vec.sum() - 1.0) > 1e-12:
                    raise ValueError(f"sender {k}: not a probability vector: {vec}")
                points.append(None)
            vec.setflags(write=False)
            dists.append(vec)
        return cls(tuple(dists), tuple(points))

    @classmethod
    def point(cls, spec: SdMacSpec, x) -> "InputModel":
        return cls.of(spec, spec.check_input(x))

    @classmethod
    def product(cls, spec: SdMacSpec, dists) -> "InputModel":
        return cls.of(spec, [np.asarray(d, dtype=float) for d in dists])


def state_output_given_input(spec: SdMacSpec, dists, k: int) -> np.ndarray:
    """``J[..., x_k, s_k, y] = P(S_k = s_k, Y = y | X_k = x_k)``.

    ``dists`` holds one vector per sender, optionally with a shared leading
    batch axis ``(B, |X_j|)``.  Sender k's own entry is ignored.
    """
    check(spec)
    K = spec.num_senders
    A = spec.sender_state_kernel(k)
    xs = _LETTERS[:K]
    batched = any(np.ndim(d) == 2 for d in dists)
    b = "Z" if batched else ""
    operands, subs = [A], [xs + "SY"]
    for j in range(K):
        if j == k:
            continue
        d = np.asarray(dists[j], dtype=float)
        operands.append(d)
        subs.append(("Z" if d.ndim == 2 else "") + xs[j])
    if batched and not any(s.startswith("Z") for s in subs):
        # only sender k's own law carries the batch axis; the result does not depend on it
        size = np.shape(dists[k])[0]
        joint = np.einsum(",".join(subs) + "->" + xs[k] + "SY", *operands, optimize=True)
        return np.broadcast_to(joint, (size,) + joint.shape)
    expr = ",".join(subs) + "->" + b + xs[k] + "SY"
    return np.einsum(expr, *operands, optimize=True)


def bayes_costs(joint: np.ndarray, d: np.ndarray) -> np.ndarray:
    """``C[..., x, y, t] = sum_s joint[..., x, s, y] * d(s, t)``."""
    return np.einsum("...xsy,st->...xyt", joint, d)


def symbol_distortions(spec: SdMacSpec, dists, k: int) -> np.ndarray:
    """Vector ``d*_k(x_k)`` for all ``x_k`` (batched like ``dists``)."""
    joint = state_output_given_input(spec, dists, k)
    return bayes_costs(joint, spec.distortion[k]).min(axis=-1).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class PosteriorTable:
    """``P(s_k | x_k, y)`` stored as ``probs[x_k, y, s_k]``; NaN rows are undefined."""

    sender: int
    probs: np.ndarray
    output_given_input: np.ndarray  # P(y | x_k), [x_k, y]

    @property
    def defined(self) -> np.ndarray:
        return self.output_given_input > 0

    def at(self, x_k: int, y: int) -> np.ndarray:
        if not self.defined[x_k, y]:
            raise UndefinedConditional(
                f"P(y={y} | x_{self.sender}={x_k}) = 0; posterior undefined", index=(x_k, y)
            )
        return self.probs[x_k, y]


def posterior(spec: SdMacSpec, model: InputModel, k: int) -> PosteriorTable:
    joint = state_output_given_input(spec, model.dists, k)  # [x_k, s_k, y]
    p_y = joint.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.moveaxis(joint, 1, -1) / p_y[..., None]
    probs[p_y <= 0] = np.nan
    probs.setflags(write=False)
    return PosteriorTable(k, probs, p_y)


@dataclass(frozen=True, eq=False)
class EstimatorTable:
    """Optimal deterministic estimator ``h*_k`` for one sender.

    ``s_hat[x_k, y]`` is the estimate; ``cell_distortion[x_k, y]`` its expected
    distortion given the cell (NaN where the cell has probability zero).
    """

    sender: int
    s_hat: np.ndarray
    posterior: PosteriorTable
    cell_distortion: np.ndarray

    def __call__(self, x_k: int, y: int) -> int:
        return int(self.s_hat[x_k, y])

    def expected_distortion(self, x_k: int) -> float:
        """``d*_k(x_k)``: cell distortions weighted by ``P(y | x_k)``."""
        p_y = self.posterior.output_given_input[x_k]
        cells = np.where(p_y > 0, self.cell_distortion[x_k], 0.0)
        return float(p_y @ cells)

    def to_csv(self) -> str:
        S = self.posterior.probs.shape[-1]
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["k", "x_k", "y", "s_hat"] + [f"posterior_{s}" for s in range(S)] + ["cell_distortion"])
        X, Y = self.s_hat.shape
        for x in range(X):
            for y in range(Y):
                if self.posterior.defined[x, y]:
                    post = [f"{p:.9g}" for p in self.posterior.probs[x, y]]
                    cell = f"{self.cell_distortion[x, y]:.9g}"
                else:
                    post, cell = [""] * S, ""
                w.writerow([self.sender, x, y, int(self.s_hat[x, y])] + post + [cell])
        return out.getvalue()


def _argmin_first(costs: np.ndarray) -> np.ndarray:
    near = costs <= costs.min(axis=-1, keepdims=True) + _TIE_TOL
    return near.argmax(axis=-1)


def optimal_estimator(spec: SdMacSpec, model: InputModel, k: int) -> EstimatorTable:
    post = posterior(spec, model, k)
    d = spec.distortion[k]
    defined = post.defined
    safe = np.where(defined[..., None], post.probs, 0.0)
    costs = safe @ d  # [x_k, y, t]
    s_hat = np.where(defined, _argmin_first(costs), 0)
    cell = np.take_along_axis(costs, s_hat[..., None], axis=-1)[..., 0]
    cell = np.where(defined, cell, np.nan)
    s_hat.setflags(write=False)
    cell.setflags(write=False)
    return EstimatorTable(k, s_hat, post, cell)


def symbol_distortion(spec: SdMacSpec, model: InputModel, k: int, x_k: int) -> float:
    """Minimal expected distortion ``d*_k(x_k)`` under ``model`` for the other senders."""
    if not 0 <= x_k < spec.input_alphabets[k]:
        raise IndexOutOfAlphabet(f"input {x_k} outside alphabet of sender {k}")
    return optimal_estimator(spec, model, k).expected_distortion(x_k)


def distribution_distortion(spec: SdMacSpec, model: InputModel, k: int, p_k) -> float:
    """``d*_k(P_k) = sum_x P_k(x) d*_k(x)``."""
    p_k = np.asarray(p_k, dtype=float)
    if p_k.shape != (spec.input_alphabets[k],):
        raise ValueError(f"P_k has shape {p_k.shape}, expected ({spec.input_alphabets[k]},)")
    table = optimal_estimator(spec, model, k)
    per_symbol = np.array([table.expected_distortion(x) for x in range(p_k.size)])
    return float(p_k @ per_symbol)


def point_mass_distortions(spec: SdMacSpec) -> np.ndarray:
    """``D[k, x_1, ..., x_K]``: ``d*_k(x_k)`` when the full tuple ``x`` is fixed."""
    key = "point_mass_distortions"
    if key not in spec._cache:
        K = spec.num_senders
        out = np.empty((K,) + spec.input_alphabets)
        eye = [np.eye(a) for a in spec.input_alphabets]
        for x in spec.input_tuples():
            dists = [eye[j][x[j]] for j in range(K)]
            for k in range(K):
                out[(k,) + x] = symbol_distortions(spec, dists, k)[x[k]]
        out.setflags(write=False)
        spec._cache[key] = out
    return spec._cache[key]


__all__ = [
    "EstimatorTable",
    "InputModel",
    "PosteriorTable",
    "bayes_costs",
    "distribution_distortion",
    "optimal_estimator",
    "point_mass_distortions",
    "posterior",
    "state_output_given_input",
    "symbol_distortion",
    "symbol_distortions",
]
