"""Information reconciliation: hash-based and code-based (error-correcting codes)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .bits import BitString, generator
from .hashing import HashFunction, toeplitz_hash

MAX_CANDIDATES = 1 << 20


class ReconciliationAbort(RuntimeError):
    """The decoder found no acceptable candidate (as opposed to a wrong guess)."""


@dataclass(frozen=True, eq=False)
class IRTranscript:
    """What Alice sends.  ``leakage_bits`` counts input-dependent bits only."""

    scheme: str
    message: np.ndarray
    leakage_bits: int
    n: int
    hash_seed: np.ndarray | None = None
    code: str | None = None
    success: bool | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "code": self.code,
            "n": self.n,
            "leakage_bits": self.leakage_bits,
            "message_hex": BitString(self.message).hex() if self.message.size else "",
        }


# ---------------------------------------------------------------------------
# Hash-based reconciliation


def ball_size(n: int, t: int) -> int:
    return sum(math.comb(n, w) for w in range(0, min(t, n) + 1))


def ball_radius(n: int, e: float, budget: float) -> int:
    """Smallest ``t`` with ``Pr[Bin(n, e) > t] <= budget``."""
    for t in range(n + 1):
        if binom.sf(t, n, e) <= budget:
            return t
    return n


def hash_length(n: int, t: int, eps: float) -> int:
    """``ceil(log2 |ball|) + ceil(log2(2/eps))``."""
    return math.ceil(math.log2(ball_size(n, t))) + math.ceil(math.log2(2 / eps))


def ir_hash_encode(x: BitString, k: int, seed: int, rng: np.random.Generator | None = None) -> IRTranscript:
    """Send a ``k``-bit Toeplitz hash of ``x``; ``k`` may exceed ``len(x)``."""
    if k < 1:
        raise ValueError("hash length must be positive")
    rng = generator(seed, "ir") if rng is None else rng
    f = toeplitz_hash(len(x), k, rng)
    return IRTranscript("hash", f.apply_bits(x.bits), k, len(x), hash_seed=f.seed)


def _gf2_solve(a: np.ndarray, s: np.ndarray):
    """Particular solution and nullspace basis of ``a d = s`` over GF(2), or None."""
    a = a.copy().astype(np.uint8)
    s = s.copy().astype(np.uint8)
    rows, cols = a.shape
    pivots = []
    r = 0
    for c in range(cols):
        hit = np.nonzero(a[r:, c])[0]
        if hit.size == 0:
            continue
        p = r + hit[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
            s[[r, p]] = s[[p, r]]
        mask = a[:, c].astype(bool)
        mask[r] = False
        a[mask] ^= a[r]
        s[mask] ^= s[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if np.any(s[r:]):
        return None
    particular = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        particular[c] = s[i]
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fcol in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[fcol] = 1
        for i, c in enumerate(pivots):
            v[c] = a[i, fcol]
        basis.append(v)
    return particular, np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def _candidates_by_nullspace(t_mat, syndrome, t):
    sol = _gf2_solve(t_mat, syndrome)
    if sol is None:
        return []
    particular, basis = sol
    out = []
    for coeffs in itertools.product((0, 1), repeat=len(basis)):
        d = particular.copy()
        for c, v in zip(coeffs, basis):
            if c:
                d ^= v
        if d.sum() <= t:
            out.append(d)
    return out


def _candidates_by_ball(t_mat, syndrome, t):
    n = t_mat.shape[1]
    out = []
    for w in range(t + 1):
        for pos in itertools.combinations(range(n), w):
            if np.array_equal(t_mat[:, list(pos)].sum(axis=1) % 2, syndrome):
                d = np.zeros(n, dtype=np.uint8)
                d[list(pos)] = 1
                out.append(d)
    return out


def ir_hash_decode(y: BitString, transcript: IRTranscript, t: int, seed: int = 0,
                   rng: np.random.Generator | None = None) -> BitString:
    """Guess ``x`` among the strings within distance ``t`` of ``y`` that match the hash.

    A uniformly random match is returned when there are several; no match
    raises :class:`ReconciliationAbort`.
    """
    if transcript.scheme != "hash":
        raise ValueError("not a hash transcript")
    n = len(y)
    if n != transcript.n:
        raise ValueError("length mismatch between y and the transcript")
    f = HashFunction(transcript.hash_seed, n, transcript.leakage_bits)
    t_mat = f.matrix()
    syndrome = transcript.message ^ f.apply_bits(y.bits)
    nullity_cost = 2.0 ** max(0, n - transcript.leakage_bits)
    ball_cost = ball_size(n, t)
    if min(nullity_cost, ball_cost) > MAX_CANDIDATES:
        raise ValueError("candidate set too large to search")
    if nullity_cost <= ball_cost:
        cands = _candidates_by_nullspace(t_mat, syndrome, t)
    else:
        cands = _candidates_by_ball(t_mat, syndrome, t)
    if not cands:
        raise ReconciliationAbort("no candidate matches the hash")
    if len(cands) == 1:
        d = cands[0]
    else:
        rng = generator(seed, "ir") if rng is None else rng
        d = cands[int(rng.integers(len(cands)))]
    return BitString(y.bits ^ d)


def hash_failure_bound(n: int, e: float, t: int, k: int) -> float:
    """``|ball| 2^-k + Pr[weight > t]``."""
    return ball_size(n, t) * 2.0 ** -k + float(binom.sf(t, n, e))


# ---------------------------------------------------------------------------
# Code-based reconciliation


@dataclass(frozen=True, eq=False)
class LinearCode:
    name: str
    generator: np.ndarray  # shape (dim, length)

    @property
    def length(self) -> int:
        return self.generator.shape[1]

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def encode(self, msgs: np.ndarray) -> np.ndarray:
        return (msgs.astype(np.int64) @ self.generator.astype(np.int64) % 2).astype(np.uint8)

    def decode(self, words: np.ndarray):
        """Return (codewords, ok) for a batch of received words."""
        raise NotImplementedError


class RepetitionCode(LinearCode):
    def __init__(self, r: int):
        if r < 1:
            raise ValueError("repetition length must be positive")
        super().__init__(f"repetition-{r}", np.ones((1, r), dtype=np.uint8))

    def decode(self, words):
        ones = words.sum(axis=1).astype(np.int64)
        r = self.length
        bit = (2 * ones > r).astype(np.uint8)
        ok = 2 * ones != r
        return np.repeat(bit[:, None], r, axis=1), ok


# [7,4] Hamming with parity-check columns equal to the binary expansion of
# the position (1..7), extended by an overall parity bit.
_H7 = ((np.arange(1, 8)[None, :] >> np.arange(3)[:, None]) & 1).astype(np.uint8)
_G8 = np.array(
    [
        [1, 1, 1, 0, 0, 0, 0, 1],
        [1, 0, 0, 1, 1, 0, 0, 1],
        [0, 1, 0, 1, 0, 1, 0, 1],
        [1, 1, 0, 1, 0, 0, 1, 0],
    ],
    dtype=np.uint8,
)


class ExtendedHammingCode(LinearCode):
    """[8,4] code correcting one error and detecting two."""

    def __init__(self):
        super().__init__("hamming-8-4", _G8.copy())

    def decode(self, words):
        words = words.astype(np.uint8)
        syn = (words[:, :7].astype(np.int64) @ _H7.T.astype(np.int64)) % 2
        pos = syn @ (1 << np.arange(3))  # 1..7, 0 means clean
        parity = words.sum(axis=1) % 2
        out = words.copy()
        ok = np.ones(len(words), dtype=bool)
        single = (pos > 0) & (parity == 1)
        out[single, pos[single] - 1] ^= 1
        parity_only = (pos == 0) & (parity == 1)
        out[parity_only, 7] ^= 1
        ok[(pos > 0) & (parity == 0)] = False
        return out, ok


def make_code(name: str, rep_length: int = 5) -> LinearCode:
    if name == "repetition":
        return RepetitionCode(rep_length)
    if name == "hamming":
        return ExtendedHammingCode()
    raise ValueError(f"unknown code {name!r}")


def ir_code_encode(x: BitString, code: LinearCode, seed: int,
                   rng: np.random.Generator | None = None) -> IRTranscript:
    """Mask each block of ``x`` with a random codeword; trailing bits are dropped."""
    blocks = len(x) // code.length
    if blocks == 0:
        raise ValueError(f"input shorter than one code block ({code.length})")
    rng = generator(seed, "ir") if rng is None else rng
    msgs = rng.integers(0, 2, size=(blocks, code.dim), dtype=np.uint8)
    u = code.encode(msgs).reshape(-1)
    used = blocks * code.length
    c = x.bits[:used] ^ u
    return IRTranscript("code", c, used - code.dim * blocks, used, code=code.name)


def ir_code_decode(y: BitString, transcript: IRTranscript, code: LinearCode) -> BitString:
    """Recover the masked codewords from ``c xor y`` and unmask.  Aborts on detected errors."""
    used = transcript.n
    c = transcript.message
    noisy = (c ^ y.bits[:used]).reshape(-1, code.length)
    words, ok = code.decode(noisy)
    if not np.all(ok):
        raise ReconciliationAbort(f"{int((~ok).sum())} block(s) failed to decode")
    return BitString(c ^ words.reshape(-1))
