"""Short block code carrying the color tuple after the common-randomness phase.

Each sender only knows its own color, so the code is a product of
per-sender codebooks: the joint codeword for colors ``l = (l_1..l_K)`` is the
symbol-wise tuple of ``c_k(l_k)``.  The receiver decodes jointly by maximum
likelihood over ``W_avg``.  Joint keys are row-major indices of ``l`` over the
codebook sizes; likelihood ties within ``LL_TIE`` go to the smaller key.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..channel import AveragedChannel
from ..errors import CodePackingFailure, IndexOutOfAlphabet, LengthMismatch

LL_TIE = 1e-9
# log-likelihood stand-in for an impossible symbol; sums below _POSSIBLE mean probability zero
_LOG_ZERO = -1e9
_POSSIBLE = -1e8
_BATCH_ELEMENTS = 1 << 21


@dataclass(frozen=True, eq=False)
class ColorTransmissionCode:
    """Product codebooks plus the joint decision table over ``Y^{n'}``.

    ``decision[y_index]`` is the decoded joint key or ``-1`` when ``y`` has
    probability zero under every codeword.  ``errors[key]`` is the exact
    probability that codeword ``key`` is not decoded as itself.
    """

    n_prime: int
    sizes: tuple[int, ...]
    codebooks: tuple[np.ndarray, ...]  # codebooks[k][l_k] -> (n',) symbols of sender k
    decision: np.ndarray
    errors: np.ndarray
    output_alphabet: int
    max_error: float

    @property
    def num_messages(self) -> int:
        return math.prod(self.sizes)

    @property
    def delta(self) -> float:
        """Largest per-codeword error probability."""
        return float(self.errors.max()) if self.errors.size else 0.0

    def key(self, colors) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in colors), self.sizes))

    def colors(self, key: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unravel_index(int(key), self.sizes))

    def codeword(self, colors) -> np.ndarray:
        """Joint codeword ``(n', K)`` for a color tuple."""
        colors = tuple(int(c) for c in colors)
        for k, (c, size) in enumerate(zip(colors, self.sizes)):
            if not 0 <= c < size:
                raise IndexOutOfAlphabet(f"color {c} of sender {k} outside 0..{size - 1}")
        return np.stack([self.codebooks[k][c] for k, c in enumerate(colors)], axis=-1)

    def output_index(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        if y.shape[-1] != self.n_prime:
            raise LengthMismatch(f"expected {self.n_prime} symbols, got {y.shape[-1]}")
        if ((y < 0) | (y >= self.output_alphabet)).any():
            raise IndexOutOfAlphabet("output symbol outside alphabet")
        weights = self.output_alphabet ** np.arange(self.n_prime - 1, -1, -1, dtype=np.int64)
        return y @ weights

    def decode_batch(self, y) -> np.ndarray:
        """Decoded colors ``(..., K)``; rows with no decision are all ``-1``."""
        keys = self.decision[self.output_index(y)]
        out = np.stack(np.unravel_index(np.maximum(keys, 0), self.sizes), axis=-1)
        out[keys < 0] = -1
        return out

    def decode(self, y) -> tuple[int, ...] | None:
        key = int(self.decision[self.output_index(y)])
        return None if key < 0 else self.colors(key)

    def decoding_set(self, colors) -> np.ndarray:
        """Output sequences (as rows) decoded to ``colors``."""
        idx = np.flatnonzero(self.decision == self.key(colors))
        digits = np.unravel_index(idx, (self.output_alphabet,) * self.n_prime)
        return np.stack(digits, axis=-1)

    def to_dict(self) -> dict:
        return {
            "n_prime": self.n_prime,
            "sizes": list(self.sizes),
            "codebooks": [cb.tolist() for cb in self.codebooks],
            "decision": self.decision.tolist(),
            "errors": self.errors.tolist(),
            "max_error": self.max_error,
        }


def output_sequences(alphabet: int, length: int) -> np.ndarray:
    """All of ``Y^length`` in row-major order, shape ``(alphabet**length, length)``."""
    grids = np.indices((alphabet,) * length).reshape(length, -1)
    return grids.T


class _Packer:
    """Incremental maximum-likelihood bookkeeping for the greedy construction.

    Per output sequence it keeps the winning joint key, its log-likelihood and
    its probability; per committed joint key the probability of being decoded
    correctly.  Adding codewords only shrinks existing decoding sets, so an
    existing key loses exactly the winner probability of the sequences taken.
    """

    def __init__(self, avg: AveragedChannel, n_prime: int, sizes, admissible, point_dist, caps, max_error):
        self.K = len(sizes)
        self.n_prime = n_prime
        self.sizes = tuple(int(m) for m in sizes)
        self.alphabets = tuple(avg.input_alphabets)
        self.Y = avg.output_alphabet
        with np.errstate(divide="ignore"):
            logw = np.log(avg.flat)
        self.logw = np.where(avg.flat > 0, logw, _LOG_ZERO)
        self.admissible = np.asarray(admissible, dtype=bool).ravel()
        self.point_dist = point_dist.reshape(self.K, -1)  # [k, flat x]
        self.caps = np.asarray(caps, dtype=float)
        self.max_error = float(max_error)
        self.num_outputs = self.Y**n_prime
        self.best = np.full(self.num_outputs, -np.inf)
        self.winner = np.full(self.num_outputs, -1, dtype=np.int64)
        self.winner_prob = np.zeros(self.num_outputs)
        self.codebooks: list[list[np.ndarray]] = [[] for _ in range(self.K)]
        self.correct = np.zeros(math.prod(self.sizes))
        self.committed = np.zeros(math.prod(self.sizes), dtype=bool)

    def _loglik(self, flat: np.ndarray) -> np.ndarray:
        """Log-likelihood of every output sequence, ``flat`` (C, n') -> (C, Y^{n'})."""
        C = flat.shape[0]
        ll = np.zeros((C,) + (self.Y,) * self.n_prime)
        for t in range(self.n_prime):
            shape = [C] + [1] * self.n_prime
            shape[1 + t] = self.Y
            ll = ll + self.logw[flat[:, t]].reshape(shape)
        return ll.reshape(C, -1)

    def combos(self, k: int, index: int):
        """Joint index tuples created by giving sender k codeword ``index``."""
        ranges = [[index] if j == k else range(len(self.codebooks[j])) for j in range(self.K)]
        return list(itertools.product(*ranges))

    def evaluate(self, k: int, candidates: np.ndarray, index: int):
        """First candidate (position in ``candidates``) acceptable as codeword ``index`` of sender k.

        Returns ``(-1, None)`` if none is; otherwise the position and the
        bookkeeping update that :meth:`commit` applies.
        """
        combos = self.combos(k, index)
        C, B = len(combos), len(candidates)
        joint = np.empty((B, C, self.n_prime, self.K), dtype=np.int64)
        for c, idx in enumerate(combos):
            for j in range(self.K):
                if j != k:
                    joint[:, c, :, j] = self.codebooks[j][idx[j]]
        joint[:, :, :, k] = candidates[:, None, :]
        flat = np.ravel_multi_index(tuple(np.moveaxis(joint, -1, 0)), self.alphabets)  # (B, C, n')
        ok = self.admissible[flat].all(axis=(1, 2))
        dist = self.point_dist[:, flat].mean(axis=-1)  # (K, B, C)
        ok &= (dist <= self.caps[:, None, None] + 1e-12).all(axis=(0, 2))
        if not ok.any():
            return -1, None
        keys = np.array([np.ravel_multi_index(idx, self.sizes) for idx in combos], dtype=np.int64)
        pos = np.flatnonzero(ok)
        ll = self._loglik(flat[pos].reshape(-1, self.n_prime)).reshape(len(pos), C, -1)
        top = ll.max(axis=1)  # (b, Y^n')
        first = (ll >= top[:, None, :] - LL_TIE).argmax(axis=1)  # smallest new key among near-ties
        new_key = keys[first]
        diff = top - self.best
        wins = (top > _POSSIBLE) & (
            (diff > LL_TIE) | ((np.abs(diff) <= LL_TIE) & ((self.winner < 0) | (new_key < self.winner)))
        )
        prob = np.exp(ll)
        # probability each new joint codeword is decoded as itself
        mine = wins[:, None, :] & (first[:, None, :] == np.arange(C)[None, :, None])
        new_correct = (prob * mine).sum(axis=-1)  # (b, C)
        good = (1.0 - new_correct <= self.max_error + 1e-12).all(axis=1)
        # probability mass existing codewords lose to the newcomers
        held = self.winner >= 0
        if self.committed.any() and good.any():
            lost = np.stack(
                [
                    np.bincount(self.winner[held], weights=w[held] * self.winner_prob[held], minlength=self.correct.size)
                    for w in wins
                ]
            )  # (b, keys)
            after = np.where(self.committed, 1.0 - (self.correct - lost), 0.0)
            good &= (after <= self.max_error + 1e-12).all(axis=1)
        else:
            lost = np.zeros((len(pos), self.correct.size))
        if not good.any():
            return -1, None
        b = int(np.argmax(good))
        rows = np.arange(self.num_outputs)
        update = (wins[b], top[b], new_key[b], prob[b][first[b], rows], lost[b], keys, new_correct[b])
        return int(pos[b]), update

    def commit(self, k: int, codeword: np.ndarray, update) -> None:
        wins, top, new_key, new_prob, lost, keys, new_correct = update
        self.correct -= lost
        self.best = np.where(wins, top, self.best)
        self.winner = np.where(wins, new_key, self.winner)
        self.winner_prob = np.where(wins, new_prob, self.winner_prob)
        self.correct[keys] = new_correct
        self.committed[keys] = True
        self.codebooks[k].append(np.asarray(codeword, dtype=np.int64))


def greedy_transmission_code(
    avg: AveragedChannel,
    n_prime: int,
    sizes,
    admissible,
    symbol_distortions=None,
    caps=None,
    max_error: float = 0.1,
    max_outputs: int = 1 << 22,
) -> ColorTransmissionCode:
    """Greedy maximal code with exact maximum-likelihood error evaluation.

    Parameters
    ----------
    avg : AveragedChannel
        Channel seen by the color phase.
    n_prime : int
        Block length.
    sizes : sequence of int
        Codebook size per sender; the code carries ``prod(sizes)`` messages.
    admissible : bool array over joint inputs
        Every symbol tuple of every joint codeword must be admissible.
    symbol_distortions : array ``[k, x_1..x_K]``, optional
        Per-sender distortion of each joint symbol; with ``caps`` it bounds
        the time-averaged distortion of every joint codeword.
    max_error : float
        Largest allowed error probability of any joint codeword.

    Each sender starts from its component of the lexicographically first
    admissible tuple repeated ``n_prime`` times.  Then the sender with the
    lowest fill ratio ``len(codebook)/size`` (ties to the lower index) scans
    its candidate words in lexicographic order and keeps the first one that
    leaves every joint codeword's error at most ``max_error``.
    """
    K = len(avg.input_alphabets)
    sizes = tuple(int(m) for m in sizes)
    if n_prime < 1:
        raise ValueError("n_prime must be >= 1")
    if len(sizes) != K or min(sizes) < 1:
        raise ValueError(f"need {K} codebook sizes >= 1, got {sizes}")
    if avg.output_alphabet**n_prime > max_outputs:
        raise CodePackingFailure(
            f"|Y|^n' = {avg.output_alphabet}^{n_prime} output sequences exceed the limit of {max_outputs}"
        )
    admissible = np.broadcast_to(np.asarray(admissible, dtype=bool), tuple(avg.input_alphabets))
    if symbol_distortions is None:
        symbol_distortions = np.zeros((K,) + tuple(avg.input_alphabets))
        caps = np.full(K, np.inf)
    elif caps is None:
        caps = np.full(K, np.inf)
    packer = _Packer(
        avg, n_prime, sizes, admissible, np.asarray(symbol_distortions, dtype=float), caps, max_error
    )

    start = next((x for x in itertools.product(*(range(a) for a in avg.input_alphabets)) if admissible[x]), None)
    if start is None:
        raise CodePackingFailure("no admissible input tuple")
    for k in range(K - 1):
        packer.codebooks[k].append(np.full(n_prime, start[k], dtype=np.int64))
    word = np.full((1, n_prime), start[K - 1], dtype=np.int64)
    pos, update = packer.evaluate(K - 1, word, 0)
    if pos < 0:
        raise CodePackingFailure(f"initial codeword built from {start} violates the distortion caps")
    packer.commit(K - 1, word[0], update)

    cursors = [0] * K
    totals = [avg.input_alphabets[k] ** n_prime for k in range(K)]
    while True:
        fill = [len(packer.codebooks[k]) / sizes[k] for k in range(K)]
        k = int(np.argmin(fill))
        if fill[k] >= 1.0:
            break
        combos = len(packer.combos(k, 0))
        largest = max(1, _BATCH_ELEMENTS // (combos * packer.num_outputs))
        # start small since the next acceptable word is often close; grow on failure
        batch = 1
        found = False
        while cursors[k] < totals[k]:
            stop = min(totals[k], cursors[k] + batch)
            batch = min(2 * batch, largest)
            cand = np.stack(
                np.unravel_index(np.arange(cursors[k], stop), (avg.input_alphabets[k],) * n_prime), axis=-1
            )
            used = {tuple(cw) for cw in packer.codebooks[k]}
            keep = np.array([tuple(c) not in used for c in cand], dtype=bool)
            pos, update = (-1, None) if not keep.any() else packer.evaluate(k, cand[keep], len(packer.codebooks[k]))
            if pos >= 0:
                chosen = cand[keep][pos]
                cursors[k] = int(np.ravel_multi_index(tuple(chosen), (avg.input_alphabets[k],) * n_prime)) + 1
                packer.commit(k, chosen, update)
                found = True
                break
            cursors[k] = stop
        if not found:
            have = tuple(len(cb) for cb in packer.codebooks)
            raise CodePackingFailure(
                f"greedy packing stopped at codebook sizes {have} of {sizes} "
                f"(n'={n_prime}, max error {max_error}); try a larger n or fewer colors"
            )

    errors = 1.0 - packer.correct
    errors = np.clip(errors, 0.0, 1.0)
    books = []
    for cb in packer.codebooks:
        arr = np.array(cb, dtype=np.int64)
        arr.setflags(write=False)
        books.append(arr)
    decision = packer.winner.copy()
    decision.setflags(write=False)
    errors.setflags(write=False)
    return ColorTransmissionCode(
        n_prime, sizes, tuple(books), decision, errors, avg.output_alphabet, float(max_error)
    )


def exact_errors(code: ColorTransmissionCode, avg: AveragedChannel) -> np.ndarray:
    """Recompute every joint codeword's error by summing over all of ``Y^{n'}``."""
    ys = output_sequences(code.output_alphabet, code.n_prime)
    out = np.empty(code.num_messages)
    for key in range(code.num_messages):
        word = code.codeword(code.colors(key))
        probs = np.ones(len(ys))
        for t in range(code.n_prime):
            probs *= avg.table[tuple(word[t])][ys[:, t]]
        out[key] = 1.0 - probs[code.decision == key].sum()
    return out


__all__ = ["ColorTransmissionCode", "exact_errors", "greedy_transmission_code", "output_sequences"]
