"""Entropy measures on operators and finite distributions.

Logarithms are binary throughout.  The conditioning operator ``sigma`` in the
relative entropies acts on the *trailing* tensor factors of ``rho``: if
``rho.dims == (2, 3, 2)`` and ``sigma.dims == (2,)`` then ``sigma`` lives on
the last factor.  ``sigma`` with ``dims == ()`` (see
:func:`qkdsec.operators.scalar`) means there is no conditioning system.

Conventions
-----------
* ``0 log 0 = 0``.
* The entropy of a zero operator is reported as ``0.0`` together with a
  :class:`ZeroOperatorWarning`.
* Inverses of ``sigma`` are pseudo-inverses on its support, with eigenvalues
  at or below ``SUPPORT_CUTOFF`` treated as zero.
"""

from __future__ import annotations

import itertools
import math
import warnings
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .distributions import ClassicalAtoms, JointDistribution
from .operators import (
    HermitianOperator,
    function_of,
    identity,
    partial_trace,
    support_projector,
    tensor_product,
)

SUPPORT_CUTOFF = 1e-10
NORMALIZATION_TOL = 1e-9
EXACT_KNAPSACK_MAX = 16
LN2 = math.log(2)


class SupportWarning(UserWarning):
    """The support of rho is not contained in id (x) supp(sigma)."""


class ZeroOperatorWarning(UserWarning):
    """An entropy of the zero operator was requested."""


class SupportError(ValueError):
    """Raised where a support violation has no meaningful sentinel value."""


# ---------------------------------------------------------------------------
# Shannon and von Neumann entropies


def _xlogx_sum(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > 0]
    return float(-(w * np.log2(w)).sum())


def binary_entropy(p: float) -> float:
    """Binary Shannon entropy ``h(p)``.

    >>> binary_entropy(0.5)
    1.0
    """
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"binary entropy needs p in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def shannon_entropy(weights) -> float:
    """Shannon entropy of a weight vector or array (no normalization applied)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return _xlogx_sum(w.reshape(-1))


def _require_normalized(total: float, what: str) -> None:
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"{what} must have total mass 1 (got {total!r})")


def shannon_conditional(p: JointDistribution, cond: int | Sequence[int]) -> float:
    """``H(X|Y) = H(XY) - H(Y)`` where Y is the factor(s) listed in ``cond``."""
    _require_normalized(p.total, "distribution")
    cond = [cond] if isinstance(cond, (int, np.integer)) else list(cond)
    return shannon_entropy(p.weights) - shannon_entropy(p.marginal(cond).weights)


def von_neumann_entropy(rho: HermitianOperator) -> float:
    eig = np.clip(rho.eigenvalues(), 0.0, None)
    return _xlogx_sum(eig)


def von_neumann_conditional(rho: HermitianOperator, cond: int | Sequence[int]) -> float:
    """``H(A|B) = H(rho_AB) - H(rho_B)`` with B the factors in ``cond``."""
    _require_normalized(rho.trace, "density operator")
    if not rho.is_nonnegative():
        raise ValueError("density operator must be nonnegative")
    cond = [cond] if isinstance(cond, (int, np.integer)) else list(cond)
    return von_neumann_entropy(rho) - von_neumann_entropy(partial_trace(rho, cond))


# ---------------------------------------------------------------------------
# Relative min-, max- and collision entropies on operators


def _lift(rho: HermitianOperator, sigma_like: HermitianOperator) -> HermitianOperator:
    """``id_A (x) sigma_like`` where A is the leading part of ``rho``."""
    nb = len(sigma_like.dims)
    if nb and rho.dims[-nb:] != sigma_like.dims:
        raise ValueError(f"sigma dims {sigma_like.dims} are not a suffix of {rho.dims}")
    lead = rho.dims[: len(rho.dims) - nb]
    if not lead:
        return sigma_like
    return tensor_product(identity(lead), sigma_like)


def _support_mass_outside(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """``tr((id (x) (1 - Pi_sigma)) rho)``; zero iff the support condition holds."""
    proj = _lift(rho, support_projector(sigma, SUPPORT_CUTOFF))
    return float(np.real(np.trace(rho.matrix) - np.trace(proj.matrix @ rho.matrix)))


def _is_zero(rho: HermitianOperator) -> bool:
    return float(np.max(np.abs(rho.matrix), initial=0.0)) <= SUPPORT_CUTOFF


def _inv_sqrt_lift(rho: HermitianOperator, sigma: HermitianOperator) -> np.ndarray:
    inv_sqrt = function_of(sigma, lambda w: w ** -0.5, cutoff=SUPPORT_CUTOFF)
    return _lift(rho, inv_sqrt).matrix


def min_entropy_rel(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """Min-entropy of ``rho`` relative to ``sigma`` on the trailing factors.

    Returns ``-inf`` (with a :class:`SupportWarning`) if ``rho`` has weight
    outside ``id (x) supp(sigma)``.
    """
    if _is_zero(rho):
        warnings.warn("min-entropy of the zero operator taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    outside = _support_mass_outside(rho, sigma)
    if outside > SUPPORT_CUTOFF * max(1.0, rho.trace):
        warnings.warn(
            f"rho has weight {outside:.3e} outside the support of sigma", SupportWarning, stacklevel=2
        )
        return -math.inf
    s = _inv_sqrt_lift(rho, sigma)
    lam = float(np.linalg.eigvalsh(s @ rho.matrix @ s)[-1])
    if lam <= 0:
        return -math.inf
    return -math.log2(lam)


def max_entropy_rel(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """``log tr((id (x) sigma) rho^0)`` with ``rho^0`` the support projector of ``rho``."""
    if _is_zero(rho):
        warnings.warn("max-entropy of the zero operator taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    proj = support_projector(rho, SUPPORT_CUTOFF)
    val = float(np.real(np.trace(_lift(rho, sigma).matrix @ proj.matrix)))
    if val <= 0:
        return -math.inf
    return math.log2(val)


def collision_entropy_rel(rho: HermitianOperator, sigma: HermitianOperator) -> float:
    """``-log (1/tr rho) tr((rho (id (x) sigma^{-1/2}))^2)``.

    Raises :class:`SupportError` if the support condition fails.
    """
    if _is_zero(rho):
        warnings.warn("collision entropy of the zero operator taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    outside = _support_mass_outside(rho, sigma)
    if outside > SUPPORT_CUTOFF * max(1.0, rho.trace):
        raise SupportError(f"rho has weight {outside:.3e} outside the support of sigma")
    m = rho.matrix @ _inv_sqrt_lift(rho, sigma)
    val = float(np.real(np.trace(m @ m))) / rho.trace
    return -math.log2(val)


def smooth_min_entropy_quantum(*_args, **_kwargs):
    raise NotImplementedError(
        "smoothing over general operators is a semidefinite program and is not provided; "
        "use the classical smooth entropies"
    )


smooth_max_entropy_quantum = smooth_min_entropy_quantum


# ---------------------------------------------------------------------------
# Classical entropies


def _as_atoms(p, q=None, cond=None) -> ClassicalAtoms:
    if isinstance(p, ClassicalAtoms):
        if q is not None or cond is not None:
            raise ValueError("atoms already carry their conditioning weight")
        return p
    return ClassicalAtoms.from_distribution(p, q, cond)


def _log2_ratio(atoms: ClassicalAtoms) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(atoms.log2_q), np.inf, atoms.log2_p - atoms.log2_q)


def classical_min_entropy(p, q: JointDistribution | None = None, cond=None) -> float:
    """``-log max P(x,y)/Q(y)``.

    ``p`` may be a :class:`JointDistribution` (``q`` and ``cond`` as in
    :meth:`ClassicalAtoms.from_distribution`) or prebuilt atoms.
    """
    atoms = _as_atoms(p, q, cond)
    if atoms.log2_p.size == 0:
        warnings.warn("min-entropy of the zero distribution taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    return float(-np.max(_log2_ratio(atoms)))


def classical_max_entropy(p, q: JointDistribution | None = None, cond=None) -> float:
    """``log sum_{(x,y): P(x,y) > 0} Q(y)``."""
    atoms = _as_atoms(p, q, cond)
    if atoms.log2_p.size == 0:
        warnings.warn("max-entropy of the zero distribution taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    return float(logsumexp((atoms.log2_mult + atoms.log2_q) * LN2) / LN2)


def classical_collision_entropy(p, q: JointDistribution | None = None, cond=None) -> float:
    """``-log (1/tr P) sum P(x,y)^2 / Q(y)``."""
    atoms = _as_atoms(p, q, cond)
    if atoms.log2_p.size == 0:
        warnings.warn("collision entropy of the zero distribution taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    if np.any(np.isneginf(atoms.log2_q)):
        raise SupportError("P has mass where the conditioning weight vanishes")
    log_terms = (atoms.log2_mult + 2 * atoms.log2_p - atoms.log2_q) * LN2
    log_total = logsumexp((atoms.log2_mult + atoms.log2_p) * LN2)
    return float(-(logsumexp(log_terms) - log_total) / LN2)


def classical_min_entropy_given(p: JointDistribution, cond: int | Sequence[int]) -> float:
    """Min-entropy optimized over all normalized conditioning weights.

    Equals ``-log sum_y max_x P(x, y)``.
    """
    cond = [cond] if isinstance(cond, (int, np.integer)) else list(cond)
    rest = [i for i in range(p.arity) if i not in cond]
    w = np.moveaxis(p.weights, cond, list(range(len(cond)))).reshape(
        int(np.prod([p.weights.shape[c] for c in cond])), -1
    ) if rest else p.weights.reshape(-1, 1)
    return -math.log2(float(w.max(axis=1).sum()))


def classical_max_entropy_given(p: JointDistribution, cond: int | Sequence[int]) -> float:
    """Max-entropy optimized over all normalized conditioning weights.

    Equals ``log max_y |supp P(., y)|``.
    """
    cond = [cond] if isinstance(cond, (int, np.integer)) else list(cond)
    w = np.moveaxis(p.weights, cond, list(range(len(cond))))
    w = w.reshape(int(np.prod(w.shape[: len(cond)])), -1)
    return math.log2(int((w > 0).sum(axis=1).max()))


# ---------------------------------------------------------------------------
# Classical smooth entropies


def smooth_min_entropy_classical(p, q: JointDistribution | None = None, eps: float = 0.0, cond=None) -> float:
    """Smooth min-entropy of ``P`` relative to ``Q`` (classical, exact).

    Peaks of the ratio ``P/Q`` are cut down to a common level ``2^L``.  The
    smallest level whose removed mass stays within ``eps * tr(P)`` gives
    ``-L``.  Lowering entries is the only useful move inside the smoothing
    ball (adding mass never lowers a ratio) and this cut removes the least
    mass for a given level, so the value is optimal.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    atoms = _as_atoms(p, q, cond)
    if atoms.log2_p.size == 0:
        warnings.warn("min-entropy of the zero distribution taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    lr = _log2_ratio(atoms)
    mass = atoms.mass
    total = float(mass.sum())
    budget = eps * total
    infinite = np.isinf(lr)
    budget -= float(mass[infinite].sum())
    if budget < -1e-15 * total:
        return -math.inf
    budget = max(budget, 0.0)
    log_mass = (atoms.log2_mult + atoms.log2_p)[~infinite] * LN2
    log_qmass = (atoms.log2_mult + atoms.log2_q)[~infinite] * LN2
    lr = lr[~infinite]
    order = np.argsort(-lr, kind="stable")
    lr, log_mass, log_qmass = lr[order] * LN2, log_mass[order], log_qmass[order]
    # Everything is kept in natural-log form: single groups of an n-fold
    # product easily underflow and their Q-weights overflow.
    log_a = np.logaddexp.accumulate(log_mass)
    log_b = np.logaddexp.accumulate(log_qmass)
    log_budget = math.log(budget) if budget > 0 else -math.inf
    # Removed mass when cutting at level lr[k] using the top k groups:
    # a[k-1] * (1 - exp(lr[k] + log_b[k-1] - log_a[k-1])); nondecreasing in k.
    with np.errstate(divide="ignore"):
        gap = np.minimum(lr[1:] + log_b[:-1] - log_a[:-1], 0.0)
        log_removed = np.concatenate([[-np.inf], log_a[:-1] + np.log(-np.expm1(gap))])
    k = int(np.count_nonzero(log_removed <= log_budget + 1e-12))
    # The level lies between lr[k] and lr[k-1], with the top k groups active.
    if log_budget >= log_a[k - 1]:
        return math.inf
    with np.errstate(divide="ignore"):
        log_rest = log_a[k - 1] + math.log1p(-math.exp(log_budget - log_a[k - 1]))
    level = log_rest - float(log_b[k - 1])
    if k < len(lr):
        level = max(level, float(lr[k]))
    level /= LN2
    return -level


def _exact_smooth_max(log2_p: np.ndarray, log2_q: np.ndarray, budget: float) -> float:
    p = np.exp2(log2_p)
    qw = np.exp2(log2_q)
    best = float(qw.sum())
    idx = range(len(p))
    for r in range(1, len(p) + 1):
        for subset in itertools.combinations(idx, r):
            s = list(subset)
            if p[s].sum() <= budget * (1 + 1e-12):
                best = min(best, float(qw.sum() - qw[s].sum()))
    return math.log2(best) if best > 0 else -math.inf


def smooth_max_entropy_classical(p, q: JointDistribution | None = None, eps: float = 0.0, cond=None,
                                 method: str = "auto") -> float:
    """Smooth max-entropy of ``P`` relative to ``Q`` (classical).

    Smoothing deletes support points of total mass at most ``eps * tr(P)``
    so as to remove as much ``Q``-weight as possible.  This is a knapsack
    problem; it is solved exactly by enumeration for at most
    ``EXACT_KNAPSACK_MAX`` entries and otherwise greedily, taking entries in
    order of increasing ``P/Q`` with a partial final group followed by a
    fill-in pass.  The greedy value is an upper bound on the true smooth
    max-entropy that is off by at most one entry's ``Q``-weight.

    ``method`` is ``"auto"``, ``"exact"`` or ``"greedy"``.
    """
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    atoms = _as_atoms(p, q, cond)
    if atoms.log2_p.size == 0:
        warnings.warn("max-entropy of the zero distribution taken as 0", ZeroOperatorWarning, stacklevel=2)
        return 0.0
    budget = eps * atoms.total
    small = logsumexp(atoms.log2_mult * LN2) / LN2 <= math.log2(EXACT_KNAPSACK_MAX) + 1e-9
    mult_exact = np.exp2(atoms.log2_mult) if small else None
    integral = small and np.allclose(mult_exact, np.round(mult_exact))
    if method == "exact" and not integral:
        raise ValueError(f"exact smoothing needs at most {EXACT_KNAPSACK_MAX} entries")
    if method != "greedy" and integral:
        lp = np.repeat(atoms.log2_p, np.round(mult_exact).astype(int))
        lq = np.repeat(atoms.log2_q, np.round(mult_exact).astype(int))
        return _exact_smooth_max(lp, lq, budget)

    lr = _log2_ratio(atoms)
    order = np.argsort(lr, kind="stable")
    kept_log = []  # natural-log Q-weights of what survives
    for i in order:
        lm, lpi, lqi = atoms.log2_mult[i], atoms.log2_p[i], atoms.log2_q[i]
        if np.isneginf(lqi):
            continue  # carries no Q-weight; never worth deleting
        if budget <= 0:
            kept_log.append((lm + lqi) * LN2)
            continue
        group_mass = 2.0 ** (lm + lpi)
        if group_mass <= budget:
            budget -= group_mass
            continue
        # Delete as many single entries of this group as the budget allows.
        log2_count = math.log2(budget) - lpi
        if log2_count < 52:
            count = math.floor(2.0 ** log2_count)
            frac_kept = 1.0 - count / 2.0 ** lm
            budget -= count * 2.0 ** lpi
        else:
            frac_kept = 1.0 - 2.0 ** (log2_count - lm)
            budget = 0.0
        if frac_kept > 0:
            kept_log.append((lm + lqi) * LN2 + math.log(frac_kept))
    if not kept_log:
        return -math.inf
    return float(logsumexp(kept_log) / LN2)


# ---------------------------------------------------------------------------
# Min-entropy optimized over the conditioning operator


def _sigma_from_params(x: np.ndarray, d: int) -> np.ndarray:
    a = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    s = a @ a.conj().T
    return s / np.real(np.trace(s))


def min_entropy_given_B(
    rho: HermitianOperator,
    n_cond: int = 1,
    strategy: str = "marginal",
    starts: int = 4,
    seed: int = 0,
) -> float:
    """Min-entropy of ``rho`` given its last ``n_cond`` factors.

    ``strategy="marginal"`` evaluates the min-entropy relative to the marginal
    of ``rho`` on those factors.  ``strategy="optimize"`` additionally runs a
    local search over normalized conditioning operators from several starting
    points (the marginal, the fully mixed state and random states drawn with
    ``seed``).  Both results are lower bounds on the supremum; the optimized
    one is never below the marginal one.
    """
    _require_normalized(rho.trace, "density operator")
    k = len(rho.dims)
    if not 0 <= n_cond <= k:
        raise ValueError(f"n_cond must lie in [0, {k}]")
    cond = list(range(k - n_cond, k))
    if n_cond == 0:
        from .operators import scalar

        return min_entropy_rel(rho, scalar(1.0))
    rho_b = partial_trace(rho, cond)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportWarning)
        base = min_entropy_rel(rho, rho_b)
    if strategy == "marginal":
        return base
    if strategy != "optimize":
        raise ValueError(f"unknown strategy {strategy!r}")

    d = rho_b.dim
    lead = rho.dim // d
    rm = rho.matrix

    def objective(x):
        s = _sigma_from_params(x, d)
        w, v = np.linalg.eigh(s)
        w = np.clip(w, 1e-300, None)
        inv = (v * w ** -0.5) @ v.conj().T
        lift = np.kron(np.eye(lead), inv)
        return float(np.linalg.eigvalsh(lift @ rm @ lift)[-1])

    def params_from(s: np.ndarray) -> np.ndarray:
        w, v = np.linalg.eigh(s)
        root = (v * np.sqrt(np.clip(w, 0, None) + 1e-12)) @ v.conj().T
        return np.concatenate([root.real.reshape(-1), root.imag.reshape(-1)])

    rng = np.random.default_rng(seed)
    inits = [params_from(rho_b.matrix), params_from(np.eye(d) / d)]
    inits += [rng.standard_normal(2 * d * d) for _ in range(max(0, starts - 2))]
    best = base
    for x0 in inits:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 1000 * d})
        if res.fun > 0:
            best = max(best, -math.log2(res.fun))
    return best
