import itertools
import sys

import numpy as np
import pytest

from jidas.binary_adder import BinaryAdderParams, build
from jidas.channel import SdMacSpec, hamming


@pytest.fixture
def adder():
    return build(BinaryAdderParams(0.2))


def random_spec(rng, K, max_alphabet=4, sparsity=0.3):
    """Random valid channel; some kernel entries are zeroed so posteriors can be undefined."""
    X = tuple(int(v) for v in rng.integers(1, max_alphabet + 1, K))
    S = tuple(int(v) for v in rng.integers(1, max_alphabet + 1, K))
    Y = int(rng.integers(1, max_alphabet + 1))
    kernel = rng.random(X + S + (Y,)) * (rng.random(X + S + (Y,)) > sparsity)
    kernel[..., 0] += 1e-3 * (kernel.sum(axis=-1) == 0)
    kernel /= kernel.sum(axis=-1, keepdims=True)
    state = rng.random(S)
    state /= state.sum()
    dist = tuple(rng.random((s, s)) * (rng.random() < 0.5) + hamming(s) for s in S)
    return SdMacSpec(K, X, S, Y, kernel, state, dist)


def brute_symbol_distortions(spec, dists, k):
    """d*_k(x_k) by explicit summation over every (x, s, y) and every estimate."""
    K = spec.num_senders
    X, S, Y = spec.input_alphabets, spec.state_alphabets, spec.output_alphabet
    out = []
    for xk in range(X[k]):
        joint = np.zeros((S[k], Y))  # P(s_k, y | x_k)
        for x in itertools.product(*(range(a) for a in X)):
            if x[k] != xk:
                continue
            w = 1.0
            for j in range(K):
                if j != k:
                    w *= dists[j][x[j]]
            if w == 0:
                continue
            for s in itertools.product(*(range(a) for a in S)):
                ps = spec.state_dist[s]
                for y in range(Y):
                    joint[s[k], y] += w * ps * spec.kernel[x + s + (y,)]
        total = 0.0
        for y in range(Y):
            total += min(sum(joint[sk, y] * spec.distortion[k][sk, t] for sk in range(S[k])) for t in range(S[k]))
        out.append(total)
    return np.array(out)


def noiseless_spec():
    """One sender, x=0 reveals the uniform 4-ary state as y=4+s, x>0 is echoed as y=x."""
    kernel = np.zeros((4, 4, 8))
    for s in range(4):
        kernel[0, s, 4 + s] = 1.0
        for x in range(1, 4):
            kernel[x, s, x] = 1.0
    return SdMacSpec(1, (4,), (4,), 8, kernel, np.full(4, 0.25), (hamming(4),))


def pair_output_spec():
    """Two senders whose inputs reach the receiver untouched as y = 2 x_1 + x_2."""
    kernel = np.zeros((2, 2, 2, 2, 4))
    for x1, x2, s1, s2 in itertools.product(range(2), repeat=4):
        kernel[x1, x2, s1, s2, 2 * x1 + x2] = 1.0
    state = np.full((2, 2), 0.25)
    return SdMacSpec(2, (2, 2), (2, 2), 4, kernel, state, (hamming(2), hamming(2)))


def degenerate_spec():
    """Single output letter: nothing can be identified."""
    return SdMacSpec(1, (2,), (1,), 1, np.ones((2, 1, 1)), [1.0], (np.zeros((1, 1)),))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
