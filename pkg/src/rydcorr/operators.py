"""Dense operator algebra for ensembles of three-level atoms.

Conventions used everywhere in the package:

* single-atom levels are ordered ``(g, e, r)`` -> indices ``(0, 1, 2)``;
* the N-atom basis is ``|m_0 m_1 ... m_{N-1}>`` with atom 0 the slowest index,
  i.e. the ordering produced by ``np.kron`` with atom 0 leftmost;
* density matrices are vectorized column-stacked (Fortran order), so that
  ``vec(A X B) = (B^T kron A) vec(X)``.

Operators are plain complex ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

G, E, R = 0, 1, 2
LEVELS = ("g", "e", "r")
N_LEVELS = 3


class NonUniqueNullSpaceError(RuntimeError):
    """The null space has more dimensions than the caller expected."""

    def __init__(self, dimension: int):
        super().__init__(f"null space has dimension {dimension}, expected 1")
        self.dimension = dimension


def sigma(m: int, n: int) -> np.ndarray:
    """Single-atom transition operator ``|m><n|``."""
    op = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    op[m, n] = 1.0
    return op


def dag(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def identity(n_atoms: int) -> np.ndarray:
    return np.eye(N_LEVELS**n_atoms, dtype=complex)


def embed(op: np.ndarray, atom: int, n_atoms: int) -> np.ndarray:
    """Place a 3x3 single-atom operator on ``atom`` of an ``n_atoms`` register."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (N_LEVELS, N_LEVELS):
        raise ValueError(f"expected a 3x3 single-atom operator, got shape {op.shape}")
    if not 0 <= atom < n_atoms:
        raise IndexError(f"atom {atom} out of range for {n_atoms} atoms")
    eye = np.eye(N_LEVELS, dtype=complex)
    factors = [op if k == atom else eye for k in range(n_atoms)]
    return reduce(np.kron, factors)


def basis_index(levels: str | tuple[int, ...]) -> int:
    """Index of a product basis state, e.g. ``basis_index("gr") == 2``."""
    if isinstance(levels, str):
        levels = tuple(LEVELS.index(c) for c in levels)
    idx = 0
    for m in levels:
        idx = idx * N_LEVELS + m
    return idx


def basis_state(levels: str | tuple[int, ...]) -> np.ndarray:
    n = len(levels)
    psi = np.zeros(N_LEVELS**n, dtype=complex)
    psi[basis_index(levels)] = 1.0
    return psi


def ground_state(n_atoms: int) -> np.ndarray:
    return basis_state((G,) * n_atoms)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape((dim, dim), order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X``."""
    return np.kron(np.eye(a.shape[0], dtype=complex), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X B``."""
    return np.kron(b.T, np.eye(b.shape[0], dtype=complex))


def sprepost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X B``."""
    return np.kron(b.T, a)


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on ``dim x dim`` matrices stored as a ``dim^2 x dim^2`` array."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = m.shape[0]
        d = int(round(np.sqrt(n)))
        if m.ndim != 2 or m.shape[1] != n or d * d != n:
            raise ValueError(f"superoperator must be d^2 x d^2, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)


def _svd_null(m: np.ndarray, tol: float):
    if tol <= 0:
        raise ValueError("tol must be positive")
    u, s, vh = scipy.linalg.svd(m, lapack_driver="gesdd")
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    k = int(np.count_nonzero(s <= cutoff))
    right = vh[vh.shape[0] - k :].conj().T
    left = u[:, u.shape[1] - k :]
    return right, left


def null_space(m, tol: float = 1e-10, expect_unique: bool = False) -> np.ndarray:
    """Orthonormal basis (as columns) of the right null space of ``m``.

    A singular vector belongs to the null space when its singular value is at
    most ``tol`` times the largest one. With ``expect_unique`` a null space of
    dimension above one raises :class:`NonUniqueNullSpaceError`.
    """
    mat = m.matrix if isinstance(m, SuperOperator) else np.asarray(m, dtype=complex)
    right, _ = _svd_null(mat, tol)
    if expect_unique and right.shape[1] > 1:
        raise NonUniqueNullSpaceError(right.shape[1])
    return right


def kernel_projector(m, tol: float = 1e-10):
    """Right and left null bases of ``m`` from a single SVD."""
    mat = m.matrix if isinstance(m, SuperOperator) else np.asarray(m, dtype=complex)
    return _svd_null(mat, tol)
