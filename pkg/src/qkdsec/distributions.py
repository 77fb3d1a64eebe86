"""Finite joint distributions and their grouped ("atom") representation.

A :class:`JointDistribution` is a nonnegative array over a product of label
sets.  Sub-normalized weights are allowed.

The smooth-entropy routines do not operate on the dense array directly but on
:class:`ClassicalAtoms`: a list of groups of identical entries, each with a
per-entry mass ``p``, a per-entry conditioning weight ``q`` and a
multiplicity.  This makes n-fold products tractable because entries of the
product are grouped by their type, so ``(P_XY)^n`` for a binary symmetric
source has ``n + 1`` groups instead of ``4^n`` entries.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .operators import HermitianOperator, diagonal

MASS_TOL = 1e-12
MAX_GROUPS = 5_000_000


@dataclass(frozen=True, eq=False)
class JointDistribution:
    alphabets: tuple[tuple[Hashable, ...], ...]
    weights: np.ndarray

    def __post_init__(self):
        alphabets = tuple(tuple(a) for a in self.alphabets)
        w = np.array(self.weights, dtype=float)
        if w.shape != tuple(len(a) for a in alphabets):
            raise ValueError(f"weights shape {w.shape} does not match alphabets")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if w.sum() > 1 + MASS_TOL:
            raise ValueError(f"total mass {w.sum()} exceeds 1")
        w.setflags(write=False)
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_array(cls, weights, alphabets: Sequence[Sequence[Hashable]] | None = None):
        w = np.asarray(weights, dtype=float)
        if alphabets is None:
            alphabets = [tuple(range(s)) for s in w.shape]
        return cls(tuple(tuple(a) for a in alphabets), w)

    @classmethod
    def from_mapping(cls, table: Mapping[tuple, float]) -> JointDistribution:
        """Build from ``{(label_1, ..., label_k): weight}``; alphabets in first-seen order."""
        keys = [k if isinstance(k, tuple) else (k,) for k in table]
        if not keys:
            raise ValueError("empty distribution")
        arity = len(keys[0])
        if any(len(k) != arity for k in keys):
            raise ValueError("all labels must have the same arity")
        alphabets: list[list] = [[] for _ in range(arity)]
        for k in keys:
            for i, lab in enumerate(k):
                if lab not in alphabets[i]:
                    alphabets[i].append(lab)
        w = np.zeros(tuple(len(a) for a in alphabets))
        for k, v in zip(keys, table.values()):
            w[tuple(alphabets[i].index(lab) for i, lab in enumerate(k))] += float(v)
        return cls(tuple(tuple(a) for a in alphabets), w)

    @classmethod
    def from_table(cls, text: str) -> JointDistribution:
        """Parse ``label_1 ... label_k weight`` lines; ``#`` starts a comment."""
        table: dict[tuple, float] = {}
        for lineno, raw in enumerate(io.StringIO(text), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 2:
                raise ValueError(f"line {lineno}: need at least one label and a weight")
            try:
                weight = float(parts[-1])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad weight {parts[-1]!r}") from exc
            key = tuple(parts[:-1])
            table[key] = table.get(key, 0.0) + weight
        return cls.from_mapping(table)

    @classmethod
    def read_table(cls, path: str | Path) -> JointDistribution:
        return cls.from_table(Path(path).read_text(encoding="utf-8"))

    def to_table(self) -> str:
        lines = []
        for idx in np.ndindex(self.weights.shape):
            labels = " ".join(str(self.alphabets[i][j]) for i, j in enumerate(idx))
            lines.append(f"{labels} {float(self.weights[idx])!r}")
        return "\n".join(lines) + "\n"

    @property
    def arity(self) -> int:
        return self.weights.ndim

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def marginal(self, keep: Iterable[int]) -> JointDistribution:
        keep = sorted(int(i) for i in keep)
        drop = tuple(i for i in range(self.arity) if i not in keep)
        w = self.weights.sum(axis=drop) if drop else self.weights
        return JointDistribution(tuple(self.alphabets[i] for i in keep), w)

    def to_operator(self) -> HermitianOperator:
        """Diagonal embedding, one tensor factor per label coordinate."""
        return diagonal(self.weights.reshape(-1), self.weights.shape)


@dataclass(frozen=True, eq=False)
class ClassicalAtoms:
    """Groups of identical entries ``(x, y)`` of a distribution.

    All three arrays are base-2 logarithms.  Only entries with positive mass
    are stored; ``log2_q == -inf`` marks an entry outside the support of the
    conditioning weight.
    """

    log2_p: np.ndarray
    log2_q: np.ndarray
    log2_mult: np.ndarray

    @classmethod
    def from_distribution(
        cls,
        p: JointDistribution,
        q: JointDistribution | None = None,
        cond: Sequence[int] | None = None,
    ) -> ClassicalAtoms:
        """Atoms of ``P`` relative to the weight ``Q`` on the conditioning factors.

        ``cond`` defaults to the last factor when ``P`` has at least two factors,
        and to no factor otherwise.  ``q`` defaults to the marginal of ``P`` on
        ``cond`` (a trivial conditioning system gets weight 1).
        """
        if cond is None:
            cond = [p.arity - 1] if p.arity >= 2 else []
        cond = sorted(int(c) for c in cond)
        if q is None:
            q_w = p.marginal(cond).weights if cond else np.array(1.0)
        else:
            if q.weights.shape != tuple(p.weights.shape[c] for c in cond):
                raise ValueError("conditioning weight does not match the conditioning factors")
            q_w = q.weights
        shape = [1] * p.arity
        for c in cond:
            shape[c] = p.weights.shape[c]
        q_full = np.broadcast_to(np.reshape(q_w, shape), p.weights.shape)
        mask = p.weights > 0
        with np.errstate(divide="ignore"):
            lp = np.log2(p.weights[mask])
            lq = np.log2(q_full[mask])
        return cls(lp, lq, np.zeros_like(lp))

    @property
    def mass(self) -> np.ndarray:
        """Total mass of each group."""
        return np.exp2(self.log2_mult + self.log2_p)

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def power(self, n: int) -> ClassicalAtoms:
        """Atoms of the ``n``-fold product, grouped by type over value classes."""
        if n < 1:
            raise ValueError("n must be positive")
        pairs = np.stack([self.log2_p, self.log2_q], axis=1)
        classes, inverse = np.unique(pairs, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        size = np.zeros(len(classes))
        np.add.at(size, inverse, np.exp2(self.log2_mult))
        v = len(classes)
        count = math.comb(n + v - 1, v - 1)
        if count > MAX_GROUPS:
            raise ValueError(f"{count} type groups exceed the limit {MAX_GROUPS}")
        comps = _compositions(n, v)
        log2_multinom = (gammaln(n + 1) - gammaln(comps + 1).sum(axis=1)) / math.log(2)
        log2_size = np.log2(size)
        lp = comps @ classes[:, 0]
        with np.errstate(invalid="ignore"):
            lq = np.where(
                (comps[:, np.isneginf(classes[:, 1])] > 0).any(axis=1),
                -np.inf,
                comps @ np.where(np.isneginf(classes[:, 1]), 0.0, classes[:, 1]),
            )
        lm = log2_multinom + comps @ log2_size
        return ClassicalAtoms(lp, lq, lm)


def _compositions(n: int, v: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``v`` summing to ``n``."""
    if v == 1:
        return np.array([[n]], dtype=np.int64)
    if v == 2:
        k = np.arange(n + 1, dtype=np.int64)
        return np.stack([k, n - k], axis=1)
    rows = []
    for first in range(n + 1):
        rest = _compositions(n - first, v - 1)
        rows.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.concatenate(rows)


def bsc_joint(e: float) -> JointDistribution:
    """Uniform bit X sent through a binary symmetric channel with crossover e."""
    if not 0 <= e <= 1:
        raise ValueError("crossover probability must lie in [0, 1]")
    w = np.array([[(1 - e) / 2, e / 2], [e / 2, (1 - e) / 2]])
    return JointDistribution.from_array(w, [(0, 1), (0, 1)])
