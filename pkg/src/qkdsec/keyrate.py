"""Asymptotic key rates and noise thresholds for Bell-diagonal two-qubit states.

Bell weights are ordered as in :data:`qkdsec.operators.BELL_VECTORS`, so for
a Bell-diagonal state the bit error rate in the computational basis is
``l2 + l3`` and in the diagonal basis ``l1 + l3``.

Rates are per channel use and ignore sifting.  Every rate is available raw
(possibly negative, which is what threshold searches need) and clamped at 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

PROTOCOLS = ("six-state", "bb84")
BB84_GRID_STEP = 1e-4
Q_GRID_STEP = 1e-3
Q_XTOL = 1e-6
THRESHOLD_XTOL = 1e-5
# Keep the flip probability strictly below 1/2: at exactly 1/2 every rate is 0,
# which would hide the sign change that threshold searches look for.
Q_MAX = 0.5 - 1e-3


@dataclass(frozen=True)
class BellDiagonalState:
    lambda0: float
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        vals = []
        for name in ("lambda0", "lambda1", "lambda2", "lambda3"):
            v = float(getattr(self, name))
            if v < -1e-12 or math.isnan(v):
                raise ValueError(f"{name} = {v} is negative")
            v = max(v, 0.0)
            object.__setattr__(self, name, v)
            vals.append(v)
        if sum(vals) > 1 + 1e-12:
            raise ValueError(f"Bell weights sum to {sum(vals)} > 1")

    @classmethod
    def of(cls, values: Sequence[float]) -> BellDiagonalState:
        return cls(*[float(v) for v in values])

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda0, self.lambda1, self.lambda2, self.lambda3])

    @property
    def error_z(self) -> float:
        return self.lambda2 + self.lambda3

    @property
    def error_x(self) -> float:
        return self.lambda1 + self.lambda3


@dataclass(frozen=True)
class ProtocolParams:
    protocol: str
    e: float
    b: int = 1
    q: float = 0.0
    gamma: tuple[BellDiagonalState, ...] | None = None

    def __post_init__(self):
        if self.protocol == "custom":
            if not self.gamma:
                raise ValueError("a custom protocol needs a nonempty gamma")
            object.__setattr__(self, "gamma", tuple(
                g if isinstance(g, BellDiagonalState) else BellDiagonalState.of(g) for g in self.gamma))
        elif self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS} or 'custom'")
        elif self.gamma is not None:
            raise ValueError("gamma is only accepted with protocol 'custom'")
        upper = 2 / 3 if self.protocol == "six-state" else 0.5
        if not 0 <= self.e <= upper:
            raise ValueError(f"error rate {self.e} outside [0, {upper:.4g}] for {self.protocol}")
        if int(self.b) != self.b or self.b < 1:
            raise ValueError("block length b must be a positive integer")
        if not 0 <= self.q <= 0.5:
            raise ValueError("flip probability q must lie in [0, 1/2]")


@dataclass(frozen=True)
class RateResult:
    rate: float
    rate_clamped: float
    p_succ: float
    lambdas_used: BellDiagonalState
    q_used: float
    b_used: int
    e: float = field(default=float("nan"))

    def as_row(self) -> dict:
        lam = self.lambdas_used.as_array()
        return {
            "e": self.e, "b": self.b_used, "q": self.q_used, "rate": self.rate,
            "rate_clamped": self.rate_clamped, "p_succ": self.p_succ,
            "lambda0": lam[0], "lambda1": lam[1], "lambda2": lam[2], "lambda3": lam[3],
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas_used"] = list(self.lambdas_used.as_array())
        return d


# ---------------------------------------------------------------------------
# States compatible with the observed error rate


def six_state_lambdas(e: float) -> np.ndarray:
    return np.array([1 - 1.5 * e, e / 2, e / 2, e / 2])


def bb84_lambdas(e: float, t) -> np.ndarray:
    """BB84 family with both basis error rates equal to ``e``; ``t`` is ``lambda3``."""
    t = np.asarray(t, dtype=float)
    return np.stack([1 - 2 * e + t, e - t, e - t, t], axis=-1)


def gamma_diag(protocol: str, e: float, step: float = BB84_GRID_STEP) -> list[BellDiagonalState]:
    """Bell-diagonal states compatible with error rate ``e``.

    Six-state gives a single state.  BB84 gives the one-parameter family
    ``lambda3 = t`` in ``[0, e]`` sampled on a grid of the given step.
    """
    ProtocolParams(protocol, e)
    if protocol == "six-state":
        return [BellDiagonalState.of(six_state_lambdas(e))]
    ts = _bb84_grid(e, step)
    return [BellDiagonalState.of(row) for row in bb84_lambdas(e, ts)]


def _bb84_grid(e: float, step: float) -> np.ndarray:
    if e == 0:
        return np.zeros(1)
    n = max(1, int(math.ceil(e / step)))
    return np.linspace(0.0, e, n + 1)


# ---------------------------------------------------------------------------
# Entropy differences


def _h(p):
    """Vectorized binary entropy with 0 log 0 = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, out)


def _lam(l) -> np.ndarray:
    return l.as_array() if isinstance(l, BellDiagonalState) else np.asarray(l, dtype=float)


def _groups(lam: np.ndarray):
    s01 = lam[..., 0] + lam[..., 1]
    s23 = lam[..., 2] + lam[..., 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(s01 > 0, lam[..., 0] / np.where(s01 > 0, s01, 1), 0.0)
        beta = np.where(s23 > 0, lam[..., 2] / np.where(s23 > 0, s23, 1), 0.0)
    return s01, s23, alpha, beta


def entropy_diff_oneway(l) -> float | np.ndarray:
    """``H(X|E) - H(X|Y)`` for one-way post-processing without preprocessing.

    Accepts a :class:`BellDiagonalState` or an array whose last axis holds the
    four weights.  A group with zero mass contributes nothing.
    """
    lam = _lam(l)
    s01, s23, alpha, beta = _groups(lam)
    out = 1 - s01 * _h(alpha) - s23 * _h(beta) - _h(s01)
    return float(out) if np.ndim(out) == 0 else out


def hbar(p, q):
    """Binary entropy of ``1/2 + 1/2 sqrt(1 - 16 p(1-p) q(1-q))``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    rad = np.clip(1 - 16 * p * (1 - p) * q * (1 - q), 0.0, 1.0)
    out = _h(0.5 + 0.5 * np.sqrt(rad))
    return float(out) if np.ndim(out) == 0 else out


def entropy_diff_noisy(l, q: float) -> float | np.ndarray:
    """``H(X'|E) - H(X'|Y)`` where Alice flips each bit with probability ``q``."""
    lam = _lam(l)
    s01, s23, alpha, beta = _groups(lam)
    out = (
        1
        - s01 * (_h(alpha) - hbar(alpha, q))
        - s23 * (_h(beta) - hbar(beta, q))
        - _h(s01 * q + s23 * (1 - q))
    )
    return float(out) if np.ndim(out) == 0 else out


def entropy_x_given_e(l, q: float = 0.0) -> float:
    """``H(X'|E)``, the part of :func:`entropy_diff_noisy` not due to Bob."""
    lam = _lam(l)
    s01, s23, _, _ = _groups(lam)
    return float(entropy_diff_noisy(lam, q) + _h(s01 * q + s23 * (1 - q)))


def entropy_x_given_y(l, q: float = 0.0) -> float:
    lam = _lam(l)
    s01, s23, _, _ = _groups(lam)
    return float(_h(s01 * q + s23 * (1 - q)))


def ad_transform(l, b: int):
    """Bell weights after advantage distillation on blocks of length ``b``.

    Returns ``(p_succ, new_weights)``; the result has the same type as the
    input (state or array with the weights on the last axis).
    """
    if int(b) != b or b < 1:
        raise ValueError("block length must be a positive integer")
    lam = _lam(l)
    s01 = lam[..., 0] + lam[..., 1]
    s23 = lam[..., 2] + lam[..., 3]
    d01 = lam[..., 0] - lam[..., 1]
    d23 = lam[..., 2] - lam[..., 3]
    p_succ = s01 ** b + s23 ** b
    if np.any(p_succ <= 0):
        raise ZeroDivisionError("acceptance probability vanishes")
    out = np.stack(
        [
            (s01 ** b + d01 ** b) / (2 * p_succ),
            (s01 ** b - d01 ** b) / (2 * p_succ),
            (s23 ** b + d23 ** b) / (2 * p_succ),
            (s23 ** b - d23 ** b) / (2 * p_succ),
        ],
        axis=-1,
    )
    if isinstance(l, BellDiagonalState):
        return float(p_succ), BellDiagonalState.of(np.clip(out, 0.0, None))
    return p_succ, out


# ---------------------------------------------------------------------------
# Rates


def _block_rates(lam: np.ndarray, b: int, q: float) -> np.ndarray:
    p_succ, lt = ad_transform(lam, b)
    return p_succ * entropy_diff_noisy(lt, q) / b


def _min_over_gamma(protocol: str, e: float, b: int, q: float, gamma=None):
    """Minimal rate over the compatible states: (rate, lambdas, p_succ)."""
    if protocol == "custom":
        lam = np.stack([g.as_array() for g in gamma])
        vals = _block_rates(lam, b, q)
        i = int(np.argmin(vals))
        p_succ, _ = ad_transform(lam[i], b)
        return float(vals[i]), lam[i], float(p_succ)
    if protocol == "six-state":
        lam = six_state_lambdas(e)
        p_succ, lt = ad_transform(lam, b)
        return float(p_succ * entropy_diff_noisy(lt, q) / b), lam, float(p_succ)
    ts = _bb84_grid(e, BB84_GRID_STEP)
    vals = _block_rates(bb84_lambdas(e, ts), b, q)
    i = int(np.argmin(vals))
    best_t, best = float(ts[i]), float(vals[i])
    if e > 0:
        lo, hi = float(ts[max(i - 1, 0)]), float(ts[min(i + 1, len(ts) - 1)])
        if hi > lo:
            res = minimize_scalar(
                lambda t: float(_block_rates(bb84_lambdas(e, t), b, q)),
                bounds=(lo, hi), method="bounded", options={"xatol": 1e-10},
            )
            if res.fun < best:
                best_t, best = float(res.x), float(res.fun)
    lam = bb84_lambdas(e, best_t)
    p_succ, _ = ad_transform(lam, b)
    return best, lam, float(p_succ)


def rate(params: ProtocolParams) -> RateResult:
    """Key rate per channel use, minimized over the compatible states.

    ``lambdas_used`` holds the minimizing state before advantage distillation.
    With ``protocol="custom"`` the minimum runs over the explicit ``gamma``;
    ``e`` is then only carried into the result.
    """
    r, lam, p_succ = _min_over_gamma(params.protocol, params.e, int(params.b), params.q, params.gamma)
    return RateResult(
        rate=r,
        rate_clamped=max(0.0, r),
        p_succ=p_succ,
        lambdas_used=BellDiagonalState.of(np.clip(lam, 0.0, None)),
        q_used=params.q,
        b_used=int(params.b),
        e=params.e,
    )


def optimize_preprocessing(protocol: str, e: float, b: int = 1) -> tuple[float, float]:
    """Flip probability maximizing the rate, and that rate.

    A grid over ``[0, Q_MAX]`` with step ``Q_GRID_STEP`` locates the best
    cell; a bounded scalar search then refines it to ``Q_XTOL``.  The q = 0
    endpoint is always a candidate, so the result is never below the
    unprocessed rate.
    """
    ProtocolParams(protocol, e, b)

    def f(q):
        return _min_over_gamma(protocol, e, b, float(q))[0]

    grid = np.arange(0.0, Q_MAX + Q_GRID_STEP / 2, Q_GRID_STEP)
    if protocol == "six-state":
        lam = six_state_lambdas(e)[None, :]
    else:
        lam = bb84_lambdas(e, _bb84_grid(e, BB84_GRID_STEP))
    p_succ, lt = ad_transform(lam, b)
    # rows: q, columns: compatible states
    vals = p_succ[None, :] * entropy_diff_noisy(lt[None, :, :], grid[:, None]) / b
    vals = np.asarray(vals).min(axis=1)
    i = int(np.argmax(vals))
    best_q, best = float(grid[i]), float(vals[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
    if hi > lo:
        res = minimize_scalar(lambda q: -f(q), bounds=(lo, hi), method="bounded",
                              options={"xatol": Q_XTOL})
        if -res.fun > best:
            best_q, best = float(res.x), float(-res.fun)
    return best_q, best


def sup_rate(protocol: str, e: float, b: int = 1, optimize_q: bool = False) -> float:
    if optimize_q:
        return optimize_preprocessing(protocol, e, b)[1]
    return _min_over_gamma(protocol, e, b, 0.0)[0]


class ThresholdError(RuntimeError):
    """No sign change of the rate was found."""


def find_threshold(protocol: str, b: int = 1, optimize_q: bool = False,
                   scan_step: float = 0.01, xtol: float = THRESHOLD_XTOL) -> float:
    """Largest error rate with a positive rate, located by scan then bisection."""
    upper = 2 / 3 if protocol == "six-state" else 0.5
    f = lambda e: sup_rate(protocol, e, b, optimize_q)
    if not f(0.0) > 0:
        raise ThresholdError("rate is not positive at e = 0")
    lo = 0.0
    hi = None
    e = scan_step
    while e <= upper + 1e-12:
        if f(e) > 0:
            lo = e
        else:
            hi = e
            break
        e += scan_step
    if hi is None:
        raise ThresholdError(f"rate stays positive up to e = {upper:.4g}")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_b_scan(protocol: str, b_max: int, optimize_q: bool = False) -> list[tuple[int, float | None]]:
    """Threshold for each block length ``1..b_max`` (None where no bracket exists)."""
    out = []
    for b in range(1, b_max + 1):
        try:
            out.append((b, find_threshold(protocol, b, optimize_q)))
        except ThresholdError:
            out.append((b, None))
    return out


# ---------------------------------------------------------------------------
# Large-block behaviour of advantage distillation


@dataclass(frozen=True)
class ADCriterion:
    delta: float
    epsilon: float
    positive: bool


def asymptotic_ad_criterion(e: float, b: int) -> ADCriterion:
    """Quantities deciding the sign of the rate for long blocks (six-state).

    ``delta = e^b / ((1-e)^b + e^b)`` and ``epsilon = ((1-2e)/(1-e))^b``; the
    rate is positive for q close to 1/2 iff ``epsilon^2 >= 6 delta``.  The
    comparison is made in log space so large ``b`` does not underflow.
    """
    if not 0 <= e < 0.5:
        raise ValueError("e must lie in [0, 1/2)")
    if int(b) != b or b < 1:
        raise ValueError("b must be a positive integer")
    if e == 0:
        return ADCriterion(0.0, 1.0, True)
    log_delta = b * math.log(e) - np.logaddexp(b * math.log(1 - e), b * math.log(e))
    log_eps = b * (math.log(1 - 2 * e) - math.log(1 - e)) if e < 0.5 else -math.inf
    positive = bool(2 * log_eps >= math.log(6) + log_delta)
    return ADCriterion(math.exp(log_delta), math.exp(log_eps), positive)


AD_LIMIT = 0.5 - math.sqrt(5) / 10


def ad_criterion_threshold(b: int, xtol: float = 1e-12) -> float:
    """Largest e with ``epsilon^2 >= 6 delta`` at block length ``b`` (bisection)."""
    lo, hi = 0.0, 0.5 - 1e-15
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if asymptotic_ad_criterion(mid, b).positive:
            lo = mid
        else:
            hi = mid
    return lo


def ad_threshold_limit(b_max: int = 200) -> dict:
    """Estimate of the large-``b`` threshold from a scan over ``b <= b_max``.

    The finite-``b`` threshold approaches its limit like ``1/b``; one
    Richardson step ``2 t(b_max) - t(b_max/2)`` removes that term.
    """
    thresholds = {b: ad_criterion_threshold(b) for b in range(1, b_max + 1)}
    half = max(1, b_max // 2)
    extrapolated = (b_max * thresholds[b_max] - half * thresholds[half]) / (b_max - half) \
        if b_max > half else thresholds[b_max]
    return {
        "thresholds": thresholds,
        "at_b_max": thresholds[b_max],
        "extrapolated": extrapolated,
        "analytic": AD_LIMIT,
    }


def series_rate_approx(delta: float, epsilon: float, q: float) -> float:
    """Leading-order rate ``4/ln 8 (1-delta)(epsilon^2 - 6 delta)(1/2 - q)^2``."""
    return 4 / math.log(8) * (1 - delta) * (epsilon ** 2 - 6 * delta) * (0.5 - q) ** 2


def lambdas_from_delta_epsilon(delta: float, epsilon: float) -> np.ndarray:
    """Bell weights with the given ``delta`` and ``epsilon`` parameters."""
    return np.array([(1 - delta) * (1 + epsilon) / 2, (1 - delta) * (1 - epsilon) / 2,
                     delta / 2, delta / 2])


# ---------------------------------------------------------------------------
# Sweeps

SWEEP_COLUMNS = ("e", "b", "q", "rate", "rate_clamped", "p_succ",
                 "lambda0", "lambda1", "lambda2", "lambda3")


def sweep(protocol: str, es: Iterable[float], bs: Iterable[int] = (1,),
          qs: Iterable[float] | None = (0.0,)) -> list[RateResult]:
    """Rates on a grid, ordered by e, then b, then q.

    ``qs=None`` uses the optimal flip probability at each (e, b).
    """
    rows = []
    bs = list(bs)
    qs = None if qs is None else list(qs)
    for e in es:
        for b in bs:
            if qs is None:
                q_star, _ = optimize_preprocessing(protocol, float(e), int(b))
                rows.append(rate(ProtocolParams(protocol, float(e), int(b), q_star)))
            else:
                for q in qs:
                    rows.append(rate(ProtocolParams(protocol, float(e), int(b), float(q))))
    return rows


def format_number(x: float) -> str:
    return f"{x:.6g}"


def sweep_csv(rows: Sequence[RateResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        row = r.as_row()
        w.writerow([row["b"] if c == "b" else format_number(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()
