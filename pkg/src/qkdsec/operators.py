"""Dense Hermitian operators on small tensor-product spaces.

Everything here works on explicit complex matrices of total dimension at
most ``MAX_DIM``.  Factors are addressed by their position in ``dims``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DIM = 16
HERMITIAN_TOL = 1e-12
NONNEG_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when an operator would exceed ``MAX_DIM`` or dims mismatch."""


def _prod(dims: Sequence[int]) -> int:
    out = 1
    for d in dims:
        out *= int(d)
    return out


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix together with its tensor factorization.

    The matrix is symmetrized to ``(m + m^dagger) / 2`` on construction.  A
    drift larger than ``HERMITIAN_TOL`` (relative to the largest entry) is
    rejected, so non-Hermitian input fails loudly instead of being silently
    projected.

    ``dims == ()`` denotes the trivial one-dimensional space; the matrix is
    then ``1 x 1``.
    """

    dims: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __init__(self, matrix, dims: Iterable[int] | None = None):
        m = np.array(matrix, dtype=complex)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        dims = (m.shape[0],) if dims is None else tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise DimensionError(f"factor dimensions must be positive: {dims}")
        if _prod(dims) != m.shape[0]:
            raise DimensionError(f"dims {dims} do not match matrix size {m.shape[0]}")
        if m.shape[0] > MAX_DIM:
            raise DimensionError(f"total dimension {m.shape[0]} exceeds {MAX_DIM}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        drift = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if drift > HERMITIAN_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (drift {drift:.3e})")
        m = (m + m.conj().T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in ascending order."""
        return np.linalg.eigvalsh(self.matrix)

    def is_nonnegative(self, tol: float = NONNEG_TOL) -> bool:
        return bool(self.eigenvalues()[0] >= -tol)

    def __add__(self, other: HermitianOperator) -> HermitianOperator:
        if self.dims != other.dims:
            raise DimensionError(f"cannot add {self.dims} and {other.dims}")
        return HermitianOperator(self.matrix + other.matrix, self.dims)

    def __sub__(self, other: HermitianOperator) -> HermitianOperator:
        if self.dims != other.dims:
            raise DimensionError(f"cannot subtract {self.dims} and {other.dims}")
        return HermitianOperator(self.matrix - other.matrix, self.dims)

    def scale(self, c: float) -> HermitianOperator:
        return HermitianOperator(float(c) * self.matrix, self.dims)

    def __matmul__(self, other: HermitianOperator) -> HermitianOperator:
        return tensor_product(self, other)


def identity(dims: Sequence[int] | int) -> HermitianOperator:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    return HermitianOperator(np.eye(_prod(dims)), dims)


def maximally_mixed(dims: Sequence[int] | int) -> HermitianOperator:
    op = identity(dims)
    return op.scale(1.0 / op.dim)


def scalar(value: float = 1.0) -> HermitianOperator:
    """Operator on the trivial space (used for an absent conditioning system)."""
    return HermitianOperator(np.array([[value]]), ())


def projector(vector: Sequence[complex], dims: Sequence[int] | None = None) -> HermitianOperator:
    """Rank-one operator ``|v><v|`` (the vector is not normalized)."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return HermitianOperator(np.outer(v, v.conj()), dims)


def basis_projector(index: int, dims: Sequence[int] | int) -> HermitianOperator:
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    v = np.zeros(_prod(dims))
    v[index] = 1.0
    return projector(v, dims)


def diagonal(values: Sequence[float], dims: Sequence[int] | None = None) -> HermitianOperator:
    return HermitianOperator(np.diag(np.asarray(values, dtype=float)), dims)


def tensor_product(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    """Kronecker product with concatenated factor list."""
    if a.dim * b.dim > MAX_DIM:
        raise DimensionError(f"tensor product of dimension {a.dim * b.dim} exceeds {MAX_DIM}")
    return HermitianOperator(np.kron(a.matrix, b.matrix), a.dims + b.dims)


def tensor(*ops: HermitianOperator) -> HermitianOperator:
    out = scalar(1.0)
    for op in ops:
        out = tensor_product(out, op)
    return out


def _check_factors(op: HermitianOperator, idx: Iterable[int]) -> list[int]:
    idx = [int(i) for i in idx]
    k = len(op.dims)
    for i in idx:
        if not 0 <= i < k:
            raise IndexError(f"factor index {i} out of range for dims {op.dims}")
    if len(set(idx)) != len(idx):
        raise IndexError(f"repeated factor index in {idx}")
    return idx


def partial_trace(rho: HermitianOperator, keep: Iterable[int]) -> HermitianOperator:
    """Trace out every factor not listed in ``keep``.

    The kept factors stay in their original relative order.
    """
    keep = sorted(_check_factors(rho, keep))
    k = len(rho.dims)
    if not rho.dims:
        return rho
    t = rho.matrix.reshape(rho.dims + rho.dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:k])
    col = list(letters[k:2 * k])
    for i in range(k):
        if i not in keep:
            col[i] = row[i]
    out_row = [row[i] for i in keep]
    out_col = [col[i] for i in keep]
    spec = "".join(row) + "".join(col) + "->" + "".join(out_row) + "".join(out_col)
    reduced = np.einsum(spec, t)
    kept_dims = tuple(rho.dims[i] for i in keep)
    d = _prod(kept_dims)
    return HermitianOperator(reduced.reshape(d, d), kept_dims)


def permute_factors(rho: HermitianOperator, order: Sequence[int]) -> HermitianOperator:
    """Reorder tensor factors; ``order[i]`` is the old index of new factor ``i``."""
    order = _check_factors(rho, order)
    if len(order) != len(rho.dims):
        raise IndexError("permutation must list every factor exactly once")
    k = len(order)
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = np.transpose(t, list(order) + [k + i for i in order])
    dims = tuple(rho.dims[i] for i in order)
    return HermitianOperator(t.reshape(rho.dim, rho.dim), dims)


def spectral_decomposition(s: HermitianOperator) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs sorted by descending eigenvalue.

    Ties keep the order in which the solver reported them (stable sort).
    """
    w, v = np.linalg.eigh(s.matrix)
    order = np.argsort(-w, kind="stable")
    return [(float(w[i]), v[:, i].copy()) for i in order]


def function_of(s: HermitianOperator, fn, cutoff: float | None = None) -> HermitianOperator:
    """Apply ``fn`` to the spectrum; eigenvalues ``<= cutoff`` map to zero."""
    w, v = np.linalg.eigh(s.matrix)
    if cutoff is None:
        fw = fn(w)
    else:
        fw = np.zeros_like(w)
        mask = w > cutoff
        fw[mask] = fn(w[mask])
    return HermitianOperator((v * fw) @ v.conj().T, s.dims)


def support_projector(s: HermitianOperator, cutoff: float = NONNEG_TOL) -> HermitianOperator:
    return function_of(s, np.ones_like, cutoff=cutoff)


# Bell basis on C^2 (x) C^2, ordered |00>, |01>, |10>, |11>.
_R = 1 / np.sqrt(2)
BELL_VECTORS = np.array(
    [
        [_R, 0, 0, _R],
        [_R, 0, 0, -_R],
        [0, _R, _R, 0],
        [0, _R, -_R, 0],
    ],
    dtype=complex,
)

PAULI = {
    "id": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def bell_diagonal_operator(lambdas: Sequence[float]) -> HermitianOperator:
    """Two-qubit operator ``sum_i lambda_i |Phi_i><Phi_i|``."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (4,):
        raise ValueError("need exactly four Bell weights")
    if np.any(lam < -1e-12):
        raise ValueError(f"Bell weights must be nonnegative: {lam}")
    lam = np.clip(lam, 0.0, None)
    m = sum(l * np.outer(v, v.conj()) for l, v in zip(lam, BELL_VECTORS))
    return HermitianOperator(m, (2, 2))


def bell_diagonal_entries(sigma: HermitianOperator) -> np.ndarray:
    """``<Phi_i| sigma |Phi_i>`` for i = 0..3."""
    if sigma.dims != (2, 2):
        raise DimensionError("Bell entries need a two-qubit operator")
    return np.real(np.einsum("ij,jk,ik->i", BELL_VECTORS.conj(), sigma.matrix, BELL_VECTORS))


@dataclass(frozen=True, eq=False)
class CQState:
    """Operator classical on a register, given by its conditional operators.

    ``conditional_ops[x]`` is the (non-normalized) operator on the quantum
    part when the register holds label ``x``.
    """

    labels: tuple
    conditional_ops: Mapping

    def __init__(self, conditional_ops: Mapping, check: bool = True):
        ops = dict(conditional_ops)
        if not ops:
            raise ValueError("a cq state needs at least one label")
        dims = {op.dims for op in ops.values()}
        if len(dims) != 1:
            raise DimensionError(f"conditional operators disagree on dims: {dims}")
        if check:
            for x, op in ops.items():
                if not op.is_nonnegative():
                    raise ValueError(f"conditional operator for {x!r} is not nonnegative")
            total = sum(op.trace for op in ops.values())
            if total > 1 + 1e-12:
                raise ValueError(f"total trace {total} exceeds 1")
        object.__setattr__(self, "labels", tuple(ops))
        object.__setattr__(self, "conditional_ops", ops)

    @property
    def quantum_dims(self) -> tuple[int, ...]:
        return next(iter(self.conditional_ops.values())).dims

    def to_operator(self, register_first: bool = True) -> HermitianOperator:
        """Block operator ``sum_x |x><x| (x) rho^x`` (or with the register last)."""
        n = len(self.labels)
        out = None
        for i, x in enumerate(self.labels):
            reg = basis_projector(i, n)
            op = self.conditional_ops[x]
            term = tensor_product(reg, op) if register_first else tensor_product(op, reg)
            out = term if out is None else out + term
        return out
