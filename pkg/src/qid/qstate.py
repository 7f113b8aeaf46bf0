"""Finite-dimensional quantum states, effects and the distances between them.

Everything is dense ``complex128`` numpy; values are immutable once built
(the backing arrays are flagged read-only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionOverflow,
    EffectOutOfRange,
    NotHermitian,
    NotPSD,
    TraceNotOne,
)

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
EFFECT_TOL = 1e-9

# Largest Hilbert-space dimension any operation will materialise.
DIM_CAP = 2**16


def _frozen(matrix) -> np.ndarray:
    arr = np.array(matrix, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _check_square(arr: np.ndarray) -> None:
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")


def _hermiticity_defect(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr - arr.conj().T))) if arr.size else 0.0


def check_dim(dim: int, cap: int | None = None) -> int:
    cap = DIM_CAP if cap is None else cap
    if dim > cap:
        raise DimensionOverflow(f"dimension {dim} exceeds cap {cap}")
    return dim


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Hermitian matrix, not necessarily PSD or normalised (effects, projectors)."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.matrix)
        _check_square(arr)
        defect = _hermiticity_defect(arr)
        if defect > HERMITIAN_TOL:
            raise NotHermitian(f"max |M - M^dag| = {defect:.3e} > {HERMITIAN_TOL:.0e}")
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    @classmethod
    def zero(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim)))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, positive semi-definite, unit-trace matrix.

    Construct through :func:`make_density` (or directly; the same checks run).
    """

    matrix: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.matrix)
        _check_square(arr)
        _validate_density(arr)
        object.__setattr__(self, "matrix", arr)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def _trusted(cls, matrix) -> "DensityOperator":
        """Wrap a matrix known to be valid (products of valid states) without re-checking."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "matrix", _frozen(matrix))
        return obj

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.all(np.abs(off) <= tol))


Operator = Union[DensityOperator, HermitianOperator]


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, unitary

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def _validate_density(arr: np.ndarray) -> None:
    defect = _hermiticity_defect(arr)
    if defect > HERMITIAN_TOL:
        raise NotHermitian(f"max |M - M^dag| = {defect:.3e} > {HERMITIAN_TOL:.0e}")
    tr = np.trace(arr).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceNotOne(f"trace = {tr:.12g}, |tr - 1| = {abs(tr - 1.0):.3e}")
    lmin = float(np.linalg.eigvalsh((arr + arr.conj().T) / 2)[0])
    if lmin < -PSD_TOL:
        raise NotPSD(f"minimum eigenvalue {lmin:.3e} < -{PSD_TOL:.0e}")


def make_density(matrix) -> DensityOperator:
    """Validate ``matrix`` as a density operator."""
    return DensityOperator(np.asarray(matrix))


def pure(vector) -> DensityOperator:
    """|psi><psi| for a (not necessarily normalised) state vector."""
    v = np.asarray(vector, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return DensityOperator(np.outer(v, v.conj()))


def basis_state(index: int, dim: int) -> DensityOperator:
    m = np.zeros((dim, dim), dtype=complex)
    m[index, index] = 1.0
    return DensityOperator._trusted(m)


def maximally_mixed(dim: int) -> DensityOperator:
    return DensityOperator._trusted(np.eye(dim, dtype=complex) / dim)


def diagonal_state(probs) -> DensityOperator:
    return make_density(np.diag(np.asarray(probs, dtype=float)))


def spectrum(op: Operator) -> Spectrum:
    """Hermitian eigendecomposition with eigenvalues sorted descending."""
    m = op.matrix if hasattr(op, "matrix") else np.asarray(op)
    w, v = np.linalg.eigh(m)
    order = np.argsort(w)[::-1]
    return Spectrum(eigenvalues=w[order], eigenvectors=v[:, order])


def tensor(a: DensityOperator, b: DensityOperator, cap: int | None = None) -> DensityOperator:
    check_dim(a.dim * b.dim, cap)
    return DensityOperator._trusted(np.kron(a.matrix, b.matrix))


def tensor_power(states, cap: int | None = None) -> DensityOperator:
    """Kronecker product of a sequence of states, left to right."""
    states = list(states)
    dim = int(np.prod([s.dim for s in states]))
    check_dim(dim, cap)
    out = np.ones((1, 1), dtype=complex)
    for s in states:
        out = np.kron(out, s.matrix)
    return DensityOperator._trusted(out)


def partial_trace(rho: DensityOperator, dims: tuple[int, int], keep="A") -> DensityOperator:
    """Reduce a bipartite state on A (x) B to the subsystem named by ``keep``."""
    da, db = dims
    if da * db != rho.dim:
        raise DimensionMismatch(f"dims {da}x{db} do not factor state of dimension {rho.dim}")
    t = rho.matrix.reshape(da, db, da, db)
    if keep in ("A", 0):
        red = np.einsum("ijkj->ik", t)
    elif keep in ("B", 1):
        red = np.einsum("ijil->jl", t)
    else:
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    return DensityOperator._trusted(red)


def _same_dim(a, b) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """Trace norm ||a - b||_1, in [0, 2]."""
    _same_dim(a, b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def trace_norm(matrix) -> float:
    m = np.asarray(matrix)
    return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def born_probability(effect: Operator, rho: DensityOperator) -> float:
    """tr(effect . rho) for an effect 0 <= E <= 1."""
    _same_dim(effect, rho)
    w = np.linalg.eigvalsh(effect.matrix)
    if w[0] < -EFFECT_TOL or w[-1] > 1 + EFFECT_TOL:
        raise EffectOutOfRange(f"effect spectrum [{w[0]:.3e}, {w[-1]:.6g}] outside [0, 1]")
    p = float(np.real(np.sum(effect.matrix * rho.matrix.T)))
    if -EFFECT_TOL <= p < 0.0:
        p = 0.0
    elif 1.0 < p <= 1.0 + EFFECT_TOL:
        p = 1.0
    return p


def operator_leq(a, b, tol: float = 1e-10) -> bool:
    """True iff ``a <= b`` in the Loewner order, up to ``tol``.

    Accepts :class:`HermitianOperator`/:class:`DensityOperator`, dense arrays,
    or 1-D arrays read as diagonal operators in a shared basis (the fast path
    for projectors that are diagonal in a product eigenbasis).
    """
    ma = a.matrix if hasattr(a, "matrix") else np.asarray(a)
    mb = b.matrix if hasattr(b, "matrix") else np.asarray(b)
    if ma.ndim == 1 and mb.ndim == 1:
        if ma.shape != mb.shape:
            raise DimensionMismatch(f"dimensions differ: {ma.shape[0]} vs {mb.shape[0]}")
        diff = np.real(mb - ma)
        return bool(diff.size == 0 or diff.min() >= -tol)
    if ma.ndim == 1:
        ma = np.diag(ma)
    if mb.ndim == 1:
        mb = np.diag(mb)
    if ma.shape != mb.shape:
        raise DimensionMismatch(f"dimensions differ: {ma.shape[0]} vs {mb.shape[0]}")
    d = mb - ma
    return bool(np.linalg.eigvalsh((d + d.conj().T) / 2)[0] >= -tol)
