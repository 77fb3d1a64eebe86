"""Advantage distillation and parameter estimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np


def advantage_distill_block(xb, yb, r_bit: int):
    """One block of advantage distillation.

    Alice announces ``xb xor r^b``; Bob accepts iff his string differs from
    it by a constant pattern, which happens iff ``xb xor yb`` is constant.
    The outputs are the first bits of each side.
    """
    xb = np.asarray(getattr(xb, "bits", xb), dtype=np.uint8)
    yb = np.asarray(getattr(yb, "bits", yb), dtype=np.uint8)
    if xb.shape != yb.shape or xb.size == 0:
        raise ValueError("blocks must be nonempty and of equal length")
    c = xb ^ np.uint8(r_bit & 1)
    diff = yb ^ c
    accept = bool(np.all(diff == diff[0]))
    return accept, int(xb[0]), int(yb[0])


@dataclass(frozen=True)
class ADStats:
    blocks: int
    accepted: int
    errors: int

    @property
    def accept_rate(self) -> float:
        return self.accepted / self.blocks if self.blocks else 0.0

    @property
    def error_rate(self) -> float:
        return self.errors / self.accepted if self.accepted else 0.0


def advantage_distill(x: np.ndarray, y: np.ndarray, b: int, rng: np.random.Generator):
    """Vectorized distillation over consecutive blocks; trailing bits are dropped.

    Returns ``(x_out, y_out, stats)``.
    """
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    blocks = len(x) // b
    xb = x[: blocks * b].reshape(blocks, b)
    yb = y[: blocks * b].reshape(blocks, b)
    r = rng.integers(0, 2, size=blocks, dtype=np.uint8)
    diff = yb ^ xb ^ r[:, None]
    accept = np.all(diff == diff[:, :1], axis=1)
    x_out = xb[accept, 0]
    y_out = yb[accept, 0]
    stats = ADStats(blocks, int(accept.sum()), int((x_out != y_out).sum()))
    return x_out, y_out, stats


@dataclass(frozen=True)
class L1Region:
    """Distributions within L1 distance ``radius`` of ``reference``."""

    labels: tuple
    reference: tuple
    radius: float

    def __post_init__(self):
        if len(self.labels) != len(self.reference):
            raise ValueError("labels and reference differ in length")


@dataclass(frozen=True)
class PEResult:
    accept: bool
    frequencies: dict
    distance: float


def parameter_estimate(samples: Sequence[Hashable], region: L1Region | None) -> PEResult:
    """Accept iff the empirical frequencies lie in ``region``.

    ``region=None`` is the empty region and always rejects.  Samples with a
    label outside ``region.labels`` count fully toward the distance.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("parameter estimation needs at least one sample")
    labels, counts = np.unique(np.asarray(samples), return_counts=True)
    freq = {lab.item() if hasattr(lab, "item") else lab: c / len(samples) for lab, c in zip(labels, counts)}
    if region is None:
        return PEResult(False, freq, float("inf"))
    dist = sum(abs(freq.get(lab, 0.0) - ref) for lab, ref in zip(region.labels, region.reference))
    dist += sum(v for lab, v in freq.items() if lab not in region.labels)
    return PEResult(bool(dist <= region.radius), freq, float(dist))
