"""Master-equation generator, steady states and time propagation.

The generator is ``L(s) = i[s, H] + sum_k (C_k s C_k^+ - 1/2 {C_k^+ C_k, s})``.
Propagation uses the dense exponential of the vectorized generator; step
exponentials are cached so sweeps over a uniform grid cost one matrix-vector
product per point.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .operators import (
    NonUniqueNullSpaceError,
    SuperOperator,
    dag,
    kernel_projector,
    spost,
    spre,
    sprepost,
    unvec,
    vec,
)

NULL_TOL = 1e-10
NEGATIVITY_TOL = 1e-10


class NonUniqueSteadyStateError(NonUniqueNullSpaceError):
    pass


class SteadyStateError(RuntimeError):
    pass


class PropagationError(RuntimeError):
    def __init__(self, message: str, tau_reached: float):
        super().__init__(f"{message} (reached tau={tau_reached:.6g})")
        self.tau_reached = tau_reached


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix, or an unnormalized conditional state when ``normalized`` is False."""

    data: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        a = np.array(self.data, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"density matrix must be square, got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @classmethod
    def pure(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.data))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - dag(self.data))))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.data + dag(self.data)))[0])


def build_liouvillian(h: np.ndarray, collapse=()) -> SuperOperator:
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    if h.shape != (d, d):
        raise ValueError(f"Hamiltonian must be square, got {h.shape}")
    gen = 1j * (spost(h) - spre(h))
    for c in collapse:
        c = np.asarray(c, dtype=complex)
        if c.shape != (d, d):
            raise ValueError(f"collapse operator shape {c.shape} does not match dim {d}")
        cdc = dag(c) @ c
        gen += sprepost(c, dag(c)) - 0.5 * (spre(cdc) + spost(cdc))
    return SuperOperator(gen)


def steady_state(l: SuperOperator, reference: np.ndarray | None = None, tol: float = NULL_TOL) -> DensityMatrix:
    """Normalized stationary state of ``l``.

    If the kernel of ``l`` is degenerate and ``reference`` (a density matrix)
    is given, the state reached from ``reference`` at infinite time is
    returned, i.e. the spectral projection of ``reference`` onto the kernel.
    Without a reference a degenerate kernel raises
    :class:`NonUniqueSteadyStateError`.
    """
    right, left = kernel_projector(l, tol)
    k = right.shape[1]
    if k == 0:
        raise SteadyStateError("generator has no numerical null space; loosen tol")
    if k == 1:
        v = right[:, 0]
    elif reference is None:
        raise NonUniqueSteadyStateError(k)
    else:
        lh = left.conj().T
        v = right @ np.linalg.solve(lh @ right, lh @ vec(np.asarray(reference, dtype=complex)))
    rho = unvec(v, l.dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise SteadyStateError("null vector is traceless")
    rho = rho / tr
    rho = 0.5 * (rho + dag(rho))
    state = DensityMatrix(rho)
    lam = state.min_eigenvalue()
    if lam < -NEGATIVITY_TOL:
        raise SteadyStateError(f"steady state has negative eigenvalue {lam:.3g}")
    return state


def residual(l: SuperOperator, rho: DensityMatrix) -> float:
    """Max-norm of ``L(rho)``."""
    return float(np.max(np.abs(l.matrix @ vec(rho.data))))


class Propagator:
    """Cached dense propagators ``exp(L dt)`` for a fixed generator.

    Safe to share between threads; the cache is guarded by a lock.
    """

    def __init__(self, l: SuperOperator):
        self.l = l
        self._cache: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()

    def step(self, dt: float) -> np.ndarray:
        key = float(dt)
        with self._lock:
            u = self._cache.get(key)
        if u is None:
            u = scipy.linalg.expm(self.l.matrix * key)
            u.setflags(write=False)
            with self._lock:
                self._cache.setdefault(key, u)
        return u

    def evolve(self, rho0: np.ndarray, taus) -> np.ndarray:
        """Vectorized states at each of the sorted, non-negative ``taus``.

        Returns an array of shape ``(len(taus), d^2)``.
        """
        taus = np.asarray(taus, dtype=float)
        if taus.ndim != 1 or taus.size == 0:
            raise ValueError("taus must be a non-empty 1-D grid")
        if taus[0] < 0 or np.any(np.diff(taus) < 0):
            raise ValueError("taus must be sorted and non-negative")
        out = np.empty((taus.size, self.l.matrix.shape[0]), dtype=complex)
        diffs = np.diff(taus)
        uniform = diffs.size > 0 and np.allclose(diffs, diffs[0], rtol=1e-12, atol=0)
        v = vec(rho0)
        if taus[0] > 0:
            v = self.step(taus[0]) @ v
        out[0] = v
        if uniform:
            # one cached step reused; the grid is rebuilt from it
            u = self.step(diffs[0])
            for k in range(1, taus.size):
                v = u @ v
                out[k] = v
        else:
            for k, dt in enumerate(diffs, start=1):
                if dt > 0:
                    v = self.step(dt) @ v
                out[k] = v
        return out


def propagate(
    sigma0: DensityMatrix,
    l: SuperOperator,
    tau: float,
    method: str = "expm",
    rtol: float = 1e-9,
) -> DensityMatrix:
    """Evolve ``sigma0`` by ``tau`` under ``l``.

    ``method="expm"`` uses the dense exponential; ``method="rk"`` integrates
    with an adaptive 8th-order Runge-Kutta scheme and is meant for validation.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        return DensityMatrix(sigma0.data, sigma0.normalized)
    if method == "expm":
        v = scipy.linalg.expm(l.matrix * tau) @ vec(sigma0.data)
    elif method == "rk":
        m = l.matrix
        sol = solve_ivp(
            lambda _t, y: m @ y,
            (0.0, tau),
            vec(sigma0.data),
            method="DOP853",
            rtol=rtol,
            atol=rtol * 1e-3,
        )
        if not sol.success:
            raise PropagationError(sol.message, float(sol.t[-1]))
        v = sol.y[:, -1]
    else:
        raise ValueError(f"unknown method {method!r}")
    return DensityMatrix(unvec(v, l.dim), sigma0.normalized)
