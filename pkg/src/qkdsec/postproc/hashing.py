"""Toeplitz hashing over GF(2) and privacy amplification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..distributions import JointDistribution
from ..entropy import classical_collision_entropy
from .bits import BitString, generator

PA_MAX_X = 64
PA_MAX_E = 4
PA_MAX_L = 6


@dataclass(frozen=True, eq=False)
class HashFunction:
    """Toeplitz matrix ``T[i, j] = seed[i - j + n - 1]`` of shape ``(l, n)``."""

    seed: np.ndarray
    n: int
    l: int
    family: str = "toeplitz-gf2"

    def __post_init__(self):
        s = np.array(self.seed, dtype=np.uint8).reshape(-1)
        if self.n < 1 or self.l < 1:
            raise ValueError("input and output lengths must be positive")
        if s.size != self.n + self.l - 1:
            raise ValueError(f"seed needs {self.n + self.l - 1} bits, got {s.size}")
        s.setflags(write=False)
        object.__setattr__(self, "seed", s)

    def matrix(self) -> np.ndarray:
        i = np.arange(self.l)[:, None]
        j = np.arange(self.n)[None, :]
        return self.seed[i - j + self.n - 1]

    def apply_bits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.uint8)
        if x.shape[-1] != self.n:
            raise ValueError(f"input length {x.shape[-1]} differs from {self.n}")
        if x.ndim == 1 and self.n * self.l > 1_000_000:
            c = np.rint(fftconvolve(self.seed.astype(float), x.astype(float))).astype(np.int64)
        elif x.ndim == 1:
            c = np.convolve(self.seed.astype(np.int64), x.astype(np.int64))
        else:
            return (x.astype(np.int64) @ self.matrix().T.astype(np.int64) % 2).astype(np.uint8)
        return (c[self.n - 1:self.n - 1 + self.l] % 2).astype(np.uint8)

    def __call__(self, x: BitString) -> BitString:
        return BitString(self.apply_bits(x.bits))


def toeplitz_hash(n: int, l: int, rng: np.random.Generator) -> HashFunction:
    """Uniform member of the Toeplitz family; any output length is allowed."""
    return HashFunction(rng.integers(0, 2, size=n + l - 1, dtype=np.uint8), n, l)


def sample_hash(n: int, l: int, seed: int) -> HashFunction:
    """Uniform Toeplitz hash from ``n`` to ``l <= n`` bits."""
    if l > n:
        raise ValueError(f"output length {l} exceeds input length {n}")
    return toeplitz_hash(n, l, generator(seed, "hash"))


def apply_hash(f: HashFunction, x: BitString) -> BitString:
    return f(x)


def privacy_amplify(x: BitString, f: HashFunction) -> BitString:
    if len(x) != f.n:
        raise ValueError(f"key length {len(x)} differs from hash input length {f.n}")
    return f(x)


def _all_hashes(n: int, l: int):
    seeds = ((np.arange(2 ** (n + l - 1))[:, None] >> np.arange(n + l - 1)) & 1).astype(np.uint8)
    return [HashFunction(s, n, l) for s in seeds]


@dataclass(frozen=True)
class PAResult:
    avg_distance: float
    bound: float
    collision_entropy: float
    distances: np.ndarray


def pa_distance_exhaustive(p_xe: JointDistribution, l: int) -> PAResult:
    """Average distance from uniform of the hashed key over the whole family.

    ``p_xe`` has X as factor 0 and the classical side information E as
    factor 1; symbol ``i`` of X is hashed as the binary expansion of ``i``
    (least significant bit first) on ``ceil(log2 |X|)`` bits.  The distance is
    ``sum_{z,e} |P(f(X)=z, E=e) - 2^-l P(E=e)|`` and the bound uses the
    collision entropy relative to the marginal of E.
    """
    nx, ne = p_xe.weights.shape
    if nx > PA_MAX_X or ne > PA_MAX_E or not 1 <= l <= PA_MAX_L:
        raise ValueError(f"exhaustive regime is |X| <= {PA_MAX_X}, |E| <= {PA_MAX_E}, l <= {PA_MAX_L}")
    n = max(1, math.ceil(math.log2(nx)))
    xs = ((np.arange(nx)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    w = p_xe.weights
    pe = w.sum(axis=0)
    powers = 1 << np.arange(l)
    dists = []
    for f in _all_hashes(n, l):
        z = f.apply_bits(xs).astype(np.int64) @ powers
        joint = np.zeros((2 ** l, ne))
        np.add.at(joint, z, w)
        dists.append(float(np.abs(joint - pe[None, :] / 2 ** l).sum()))
    dists = np.array(dists)
    h2 = classical_collision_entropy(p_xe, cond=[1])
    tr = p_xe.total
    bound = math.sqrt(tr * tr) * 2 ** (-0.5 * (h2 - l))
    return PAResult(float(dists.mean()), bound, h2, dists)
