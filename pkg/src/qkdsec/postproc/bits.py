"""Bit strings and seeded random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# One stream per pipeline stage, all derived from a single seed.
STAGES = ("source", "pe", "ad", "ir", "pa", "hash")


def generator(seed: int, stage: str | None = None) -> np.random.Generator:
    """Counter-based (Philox) generator for ``seed``, optionally for one stage."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if stage is None:
        ss = np.random.SeedSequence(int(seed))
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=(STAGES.index(stage),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class BitString:
    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=np.uint8).reshape(-1)
        if b.size == 0:
            raise ValueError("a bit string must be nonempty")
        if np.any(b > 1):
            raise ValueError("bits must be 0 or 1")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_str(cls, s: str) -> BitString:
        return cls(np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0"))

    @classmethod
    def zeros(cls, n: int) -> BitString:
        return cls(np.zeros(n, dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, BitString) and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __xor__(self, other: BitString) -> BitString:
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return BitString(self.bits ^ other.bits)

    def __getitem__(self, idx) -> BitString:
        return BitString(self.bits[idx])

    @property
    def weight(self) -> int:
        return int(self.bits.sum())

    def to_bytes(self) -> bytes:
        return np.packbits(self.bits).tobytes()

    def hex(self) -> str:
        return self.to_bytes().hex()

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def __repr__(self) -> str:
        s = str(self)
        return f"BitString('{s if len(s) <= 64 else s[:61] + '...'}')"


def sample_bsc_pair(n: int, e: float, seed: int, rng: np.random.Generator | None = None):
    """Uniform ``x`` and ``y = x xor noise`` with independent flips of probability ``e``."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= e <= 0.5:
        raise ValueError("e must lie in [0, 1/2]")
    rng = generator(seed) if rng is None else rng
    x = rng.integers(0, 2, size=n, dtype=np.uint8)
    flips = (rng.random(n) < e).astype(np.uint8)
    return BitString(x), BitString(x ^ flips)
