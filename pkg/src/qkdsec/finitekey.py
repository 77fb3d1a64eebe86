"""Finite-size security parameters and the numeric bounds behind them.

Bounds whose exponents can be large are returned as :class:`BoundValue`,
which keeps the natural logarithm alongside the linear value so that tiny
probabilities such as ``e^-467`` are reported exactly instead of as 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

from scipy.special import gammaln

from .entropy import binary_entropy

LN2 = math.log(2)
EXACT_COMBINATORICS_MAX = 10_000


@dataclass(frozen=True)
class BoundValue:
    """A nonnegative bound ``value = exp(ln)``; ``vacuous`` when it is at least 1."""

    ln: float

    @property
    def log2(self) -> float:
        return self.ln / LN2

    @property
    def value(self) -> float:
        return math.exp(self.ln) if self.ln < 709 else math.inf

    @property
    def vacuous(self) -> bool:
        return self.ln >= 0

    def to_dict(self) -> dict:
        return {"value": self.value, "ln": self.ln, "log2": self.log2, "vacuous": self.vacuous}


# ---------------------------------------------------------------------------
# Parameters and the security table


@dataclass(frozen=True)
class FiniteKeyParams:
    N: int
    n: int
    m: int
    k: int
    b: int = 1
    eps: float = 1e-9
    dim_a: int = 2
    dim_b: int = 2
    alphabet_size: int = 2
    outcome_count: int = 2

    def __post_init__(self):
        for name in ("N", "n", "m", "k", "b", "dim_a", "dim_b", "alphabet_size", "outcome_count"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.N != self.b * self.n + self.m + self.k:
            raise ValueError(f"N = {self.N} differs from b*n + m + k = {self.b * self.n + self.m + self.k}")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")

    @property
    def dim(self) -> int:
        return self.dim_a * self.dim_b

    @classmethod
    def scheduled(cls, N: int, b: int = 1, eps: float = 1e-9, m: int | None = None,
                  k: int | None = None, **kw) -> FiniteKeyParams:
        """Parameters with ``m = k = ceil(N^(2/3))`` unless given.

        Whatever ``b * n`` cannot absorb goes into ``k`` so that
        ``N = b n + m + k`` holds exactly.
        """
        default = _ceil_pow(N, 2, 3)
        m = default if m is None else int(m)
        k = default if k is None else int(k)
        n = (N - m - k) // b
        if n < 1:
            raise ValueError(f"N = {N} is too small for m = {m}, k = {k}")
        k = N - b * n - m
        return cls(N=int(N), n=int(n), m=m, k=k, b=b, eps=eps, **kw)


def _ceil_pow(N: int, num: int, den: int) -> int:
    """Exact ``ceil(N^(num/den))`` for integers."""
    target = N ** num
    x = max(1, int(round(target ** (1.0 / den))))
    while x ** den < target:
        x += 1
    while x > 1 and (x - 1) ** den >= target:
        x -= 1
    return x


@dataclass(frozen=True)
class SecurityDeltas:
    r: float
    delta_prime: float | None
    mu: float | None
    delta: float | None
    reasons: tuple[str, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return self.delta is not None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reasons"] = list(self.reasons)
        d["valid"] = self.valid
        return d


def security_deltas(p: FiniteKeyParams) -> SecurityDeltas:
    """``r``, ``delta'``, ``mu`` and ``delta`` for the given parameters.

    Binary entropies need their argument in ``[0, 1/2]``; when ``r/n`` or
    ``r/m`` exceeds 1/2 the dependent quantity is ``None`` and the reason is
    recorded.  ``mu`` does not enter ``delta``, so ``delta`` can be valid even
    when ``mu`` is not.
    """
    reasons = []
    if p.k < 2:
        return SecurityDeltas(math.inf, None, None, None, ("k must be at least 2",))
    eps = p.eps
    r = p.N / p.k * (2 * math.log2(9 / eps) + p.dim ** 2 * math.log(p.k))

    delta_prime = None
    if r / p.n <= 0.5:
        delta_prime = (2.5 * math.log2(p.alphabet_size) + 4) * math.sqrt(
            binary_entropy(r / p.n) + 2 / p.n * math.log2(18 / eps)
        )
    else:
        reasons.append(f"r/n = {r / p.n:.4g} exceeds 1/2")

    mu = None
    if r / p.m <= 0.5:
        mu = 2 * math.sqrt(
            binary_entropy(r / p.m)
            + (math.log2(9 / (2 * eps)) + p.outcome_count * math.log2(p.m / 2 + 1)) / p.m
        )
    else:
        reasons.append(f"r/m = {r / p.m:.4g} exceeds 1/2")

    delta = None
    if delta_prime is not None:
        delta = (delta_prime + 2 * (p.m + p.k) / p.n * math.log2(p.dim)
                 + 2 / p.n * math.log2(3 / (2 * eps)))
    return SecurityDeltas(r, delta_prime, mu, delta, tuple(reasons))


def leak_ir_bound(n: int, cond_entropy: float, eps: float, alphabet_size: int = 2) -> float:
    """Communication sufficient for reconciliation of an i.i.d. source.

    ``n H(X|Y)`` plus the smooth-entropy correction
    ``n sqrt(3 log(2/eps) / n) log(|X| + 3)``.
    """
    return n * cond_entropy + n * math.sqrt(3 * math.log2(2 / eps) / n) * math.log2(alphabet_size + 3)


def finite_key_length(p: FiniteKeyParams, entropy_per_block: float, leak_bits: float) -> int:
    """Admissible key length ``floor(n H - leak - n delta)``, never negative.

    ``entropy_per_block`` is the minimal conditional entropy of one block's
    key bit given the adversary.  Returns 0 when the parameters are invalid.
    """
    d = security_deltas(p)
    if d.delta is None:
        return 0
    value = p.n * entropy_per_block - leak_bits - p.n * d.delta
    return max(0, int(math.floor(value)))


# ---------------------------------------------------------------------------
# Individual bounds


def definetti_error(n: int, k: int, r: float, d: int) -> BoundValue:
    """``2 exp(-k (r+1) / (2 (n+k)) + d/2 ln k)``."""
    if k < 2 or not 0 <= r <= n:
        raise ValueError("need k >= 2 and 0 <= r <= n")
    return BoundValue(math.log(2) - k * (r + 1) / (2 * (n + k)) + 0.5 * d * math.log(k))


def definetti_weight_bound(k: int, delta: float, d: int) -> BoundValue:
    """``exp(-k delta^2 / 4 + d ln k)``."""
    return BoundValue(-0.25 * k * delta ** 2 + d * math.log(k))


def aep_delta(n: int, alphabet_size: int, eps: float) -> float:
    """Deviation ``log(|X|+3) sqrt(2 log(1/eps) / n)`` of smooth entropies per symbol."""
    if n < 1 or not 0 < eps < 1:
        raise ValueError("need n >= 1 and eps in (0, 1)")
    return math.log2(alphabet_size + 3) * math.sqrt(2 * math.log2(1 / eps) / n)


def aep_tail_bound(n: int, alphabet_size: int, delta: float) -> BoundValue:
    """``2^(-n delta^2 / (2 log(|X|+3)^2))``."""
    return BoundValue(-n * delta ** 2 / (2 * math.log2(alphabet_size + 3) ** 2) * LN2)


def quantum_aep_delta(n: int, hmax_x: float, eps: float) -> float:
    """``(2 Hmax + 3) sqrt(log(1/eps)/n + 1)``, evaluated as stated.

    The ``+ 1`` under the root keeps this from vanishing for large ``n``;
    it is reproduced verbatim rather than corrected.
    """
    return (2 * hmax_x + 3) * math.sqrt(math.log2(1 / eps) / n + 1)


def typicality_bound(n: int, alphabet_size: int, delta: float) -> BoundValue:
    """``2^(-n (delta^2 / (2 ln 2) - |X| log(n+1) / n))``."""
    exponent2 = -n * (delta ** 2 / (2 * LN2) - alphabet_size * math.log2(n + 1) / n)
    return BoundValue(exponent2 * LN2)


def typicality_tolerance(n: int, alphabet_size: int, failure: float) -> float:
    """Smallest ``delta`` for which :func:`typicality_bound` is at most ``failure``."""
    need = alphabet_size * math.log2(n + 1) / n + math.log2(1 / failure) / n
    return math.sqrt(2 * LN2 * need)


# ---------------------------------------------------------------------------
# Symmetric-subspace combinatorics


@dataclass(frozen=True)
class CountValue:
    exact: int | None
    log2: float

    def to_dict(self) -> dict:
        return {"exact": None if self.exact is None else str(self.exact), "log2": self.log2}


def _log2_binom(a: int, b: int) -> float:
    return float((gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)) / LN2)


def _count(exact_fn, log2_fn, n: int) -> CountValue:
    if n <= EXACT_COMBINATORICS_MAX:
        v = exact_fn()
        return CountValue(v, _int_log2(v))
    return CountValue(None, log2_fn())


def _int_log2(v: int) -> float:
    if v <= 0:
        return -math.inf
    shift = max(0, v.bit_length() - 60)
    return math.log2(v >> shift) + shift


def symmetric_dimension(d: int, n: int) -> CountValue:
    """Number of types of length ``n`` over ``d`` symbols, ``C(n+d-1, n)``."""
    return _count(lambda: math.comb(n + d - 1, n), lambda: _log2_binom(n + d - 1, n), n)


def type_class_size(counts: Sequence[int]) -> CountValue:
    """``n! / prod_x (n Q(x))!`` for a type given by its symbol counts."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts) or sum(counts) == 0:
        raise ValueError("a type needs nonnegative counts with a positive total")
    n = sum(counts)

    def exact():
        out = math.factorial(n)
        for c in counts:
            out //= math.factorial(c)
        return out

    def approx():
        return float((gammaln(n + 1) - sum(gammaln(c + 1) for c in counts)) / LN2)

    return _count(exact, approx, n)


def subset_bound(n: int, r: int) -> tuple[CountValue, float]:
    """``C(n, r)`` together with the bound ``log2 = n h(r/n)`` (valid for r <= n/2)."""
    if not 0 <= r <= n:
        raise ValueError("need 0 <= r <= n")
    exact = _count(lambda: math.comb(n, r), lambda: _log2_binom(n, r), n)
    return exact, n * binary_entropy(r / n)


def symmetric_counts(d: int, n: int, counts: Sequence[int] | None = None,
                     r: int | None = None) -> dict:
    out = {"sym_dim": symmetric_dimension(d, n)}
    if counts is not None:
        if len(counts) != d or sum(counts) != n:
            raise ValueError("type counts must have d entries summing to n")
        out["type_class_size"] = type_class_size(counts)
    if r is not None:
        exact, bound = subset_bound(n, r)
        out["subsets"] = exact
        out["subset_bound_log2"] = bound
    return out


# ---------------------------------------------------------------------------
# Report


def bound_report(p: FiniteKeyParams, entropy_per_block: float | None = None,
                 cond_entropy: float | None = None) -> dict:
    """Every finite-size quantity for ``p`` as a JSON-ready dict.

    With ``entropy_per_block`` (adversary) and ``cond_entropy`` (Bob) given,
    the key length for the reconciliation bound :func:`leak_ir_bound` is
    included too.
    """
    d = security_deltas(p)
    report = {
        "params": asdict(p),
        "deltas": d.to_dict(),
        "aep_delta": aep_delta(p.n, p.alphabet_size, p.eps),
    }
    if math.isfinite(d.r) and d.r <= p.n:
        report["definetti_error"] = definetti_error(p.n, p.k, min(d.r, p.n), p.dim).to_dict()
    if entropy_per_block is not None and cond_entropy is not None:
        leak = leak_ir_bound(p.n, cond_entropy, p.eps, p.alphabet_size)
        ell = finite_key_length(p, entropy_per_block, leak)
        report["leak_ir"] = leak
        report["key_length"] = ell
        report["key_rate"] = ell / p.N
    return report
