"""Independent closed-form and grid oracles for the binary adder."""

import math

import numpy as np


def h2(q):
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
    return np.where((q <= 0) | (q >= 1), 0.0, v)


def adder_product_law(p_s, p1, p2):
    """Rate and both distortions when sender k sends 1 with probability p_k (p_s <= 1/2).

    Sender 1 sees its state through Y = S_1 xor N with N ~ Ber(p_s p2); for
    p_s p2 <= 1/2 the MAP rule errs with probability p_s p2 when x_1 = 1 and
    with probability p_s when x_1 = 0.
    """
    a, b = p_s * p1, p_s * p2
    rate = h2(a + b - 2 * a * b)
    d1 = (1 - p1) * p_s + p1 * p_s * p2
    d2 = (1 - p2) * p_s + p2 * p_s * p1
    return rate, d1, d2


def adder_grid_oracle(p_s, D, steps=256):
    """Exhaustive search over the product lattice with step 1/steps."""
    p = np.arange(steps + 1) / steps
    p1, p2 = np.meshgrid(p, p, indexing="ij")
    rate, d1, d2 = adder_product_law(p_s, p1, p2)
    ok = (d1 <= D[0] + 1e-12) & (d2 <= D[1] + 1e-12)
    if not ok.any():
        return None
    return float(np.where(ok, rate, -np.inf).max())


def blahut_arimoto(kernel, iters=5000):
    """Capacity in bits of a DMC given as rows P(y|x)."""
    W = np.asarray(kernel, dtype=float)
    p = np.full(W.shape[0], 1.0 / W.shape[0])
    for _ in range(iters):
        q = p @ W
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(W > 0, np.log(W / q), 0.0)
        c = np.exp((W * ratio).sum(axis=1))
        p = p * c / (p @ c)
    q = p @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(W > 0, np.log2(W / q), 0.0)
    return float(p @ (W * ratio).sum(axis=1))


def fano_min_bits(messages, error):
    """Mutual information any code with that many messages and average error needs."""
    return math.log2(messages) - h2(error) - error * math.log2(messages - 1)
