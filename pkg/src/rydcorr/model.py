"""Physical scenario -> Hamiltonian, collapse operators and interactions.

Units: frequencies in units of the excited-state decay rate, lengths in units
of the probe wavelength, hbar = 1.

Rabi convention: the atom-light term is ``-Omega (|e><g| + |g><e|)`` with no
factor 1/2, so ``Omega`` here is half of the usual textbook Rabi frequency.
A resonantly driven two-level atom therefore has the steady excited
population ``4 Omega^2 / (Gamma^2 + 8 Omega^2)``.

Interaction sign: ``V_ij`` is the signed energy shift of the state with atoms
``i`` and ``j`` both in ``|r>``. For van der Waals coupling
``V(R) = -C6/R^6`` enters the Hamiltonian with an overall minus sign, so the
shift is ``+C6/R^6``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np

from .operators import E, G, R, dag, embed, sigma

MAX_ATOMS = 4
PHASE_MODES = ("gauged", "physical")


@dataclass(frozen=True)
class ExplicitV:
    """Pairwise Rydberg-Rydberg shifts given directly, in units of Gamma_e."""

    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("interaction matrix must be square")
        if not np.array_equal(m, m.T):
            raise ValueError("interaction matrix must be symmetric")
        if np.any(np.diag(m) != 0):
            raise ValueError("interaction matrix must have zero diagonal")
        object.__setattr__(self, "matrix", tuple(tuple(float(x) for x in row) for row in m))

    @classmethod
    def uniform(cls, n_atoms: int, v: float) -> "ExplicitV":
        m = np.full((n_atoms, n_atoms), float(v))
        np.fill_diagonal(m, 0.0)
        return cls(tuple(map(tuple, m)))

    @classmethod
    def none(cls, n_atoms: int) -> "ExplicitV":
        return cls.uniform(n_atoms, 0.0)


@dataclass(frozen=True)
class VanDerWaals:
    """``V(R) = -C6 / R^6`` with ``c6`` in units of Gamma_e * lambda_p^6."""

    c6: float


Interaction = Union[ExplicitV, VanDerWaals]


@dataclass(frozen=True)
class SystemSpec:
    n_atoms: int
    omega_p: float
    omega_c: float = 0.0
    gamma_e: float = 1.0
    interaction: Interaction | None = None
    positions: tuple[tuple[float, float, float], ...] | None = None
    k_ratio: float = 1.0
    phase_mode: str = "gauged"
    gamma_reg: float = 0.0

    def __post_init__(self):
        n = self.n_atoms
        if int(n) != n or not 1 <= n <= MAX_ATOMS:
            raise ValueError(f"n_atoms must be an integer in 1..{MAX_ATOMS}, got {n}")
        object.__setattr__(self, "n_atoms", int(n))
        if self.omega_p < 0 or self.omega_c < 0:
            raise ValueError("Rabi frequencies must be non-negative")
        if self.gamma_e <= 0:
            raise ValueError("gamma_e must be positive")
        if self.gamma_reg < 0:
            raise ValueError("gamma_reg must be non-negative")
        if self.k_ratio <= 0:
            raise ValueError("k_ratio must be positive")
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")

        positions = self.positions
        if positions is None:
            positions = ((0.0, 0.0, 0.0),) * n
        pos = np.asarray(positions, dtype=float)
        if pos.shape != (n, 3):
            raise ValueError(f"positions must be {n} 3-vectors, got shape {pos.shape}")
        object.__setattr__(self, "positions", tuple(tuple(float(x) for x in p) for p in pos))

        interaction = self.interaction
        if interaction is None:
            interaction = ExplicitV.none(n)
        if isinstance(interaction, ExplicitV) and len(interaction.matrix) != n:
            raise ValueError("interaction matrix size does not match n_atoms")
        if not isinstance(interaction, (ExplicitV, VanDerWaals)):
            raise TypeError(f"unsupported interaction {interaction!r}")
        object.__setattr__(self, "interaction", interaction)

    def with_(self, **changes) -> "SystemSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        kind = "explicit" if isinstance(self.interaction, ExplicitV) else "vdw"
        d["interaction"] = {"kind": kind, **d["interaction"]}
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def blockaded(n_atoms: int, omega_p: float, omega_c: float = 1.0, v: float = 2.0, **kw) -> SystemSpec:
    """All-to-all blockaded ensemble with a uniform pair shift ``v``."""
    return SystemSpec(n_atoms, omega_p, omega_c, interaction=ExplicitV.uniform(n_atoms, v), **kw)


def two_level(n_atoms: int, omega_p: float, **kw) -> SystemSpec:
    """Independent probe-only atoms (coupling laser off)."""
    return SystemSpec(n_atoms, omega_p, 0.0, **kw)


def blockade_radius(c6: float, omega_c: float) -> float:
    if c6 <= 0 or omega_c <= 0:
        raise ValueError("c6 and omega_c must be positive")
    return (c6 / omega_c) ** (1.0 / 6.0)


def interaction_matrix(spec: SystemSpec) -> np.ndarray:
    if isinstance(spec.interaction, ExplicitV):
        return np.array(spec.interaction.matrix, dtype=float)
    pos = np.asarray(spec.positions)
    n = spec.n_atoms
    v = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist = np.linalg.norm(pos[i] - pos[j])
            if dist == 0:
                raise ValueError(f"atoms {i} and {j} coincide; van der Waals shift diverges")
            v[i, j] = v[j, i] = spec.interaction.c6 / dist**6
    return v


def drive_phases(spec: SystemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-atom phase factors of the probe and coupling fields.

    Probe wavevector ``+2 pi z``, coupling ``-2 pi k_ratio z`` in units of
    ``1/lambda_p``. Gauged mode returns ones.
    """
    n = spec.n_atoms
    if spec.phase_mode == "gauged":
        return np.ones(n, dtype=complex), np.ones(n, dtype=complex)
    z = np.asarray(spec.positions)[:, 2]
    probe = np.exp(1j * 2 * np.pi * z)
    coupling = np.exp(-1j * 2 * np.pi * spec.k_ratio * z)
    return probe, coupling


def build_hamiltonian(spec: SystemSpec) -> np.ndarray:
    n = spec.n_atoms
    dim = 3**n
    h = np.zeros((dim, dim), dtype=complex)
    probe, coupling = drive_phases(spec)
    for i in range(n):
        drive = spec.omega_p * probe[i] * embed(sigma(E, G), i, n)
        drive += spec.omega_c * coupling[i] * embed(sigma(R, E), i, n)
        h -= drive + dag(drive)
    v = interaction_matrix(spec)
    rr = [embed(sigma(R, R), i, n) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if v[i, j] != 0:
                h += v[i, j] * (rr[i] @ rr[j])
    return h


def build_collapse_ops(spec: SystemSpec) -> list[np.ndarray]:
    """Spontaneous emission ``sqrt(Gamma_e)|g><e|`` per atom, then optional |r> dephasing."""
    n = spec.n_atoms
    ops = [np.sqrt(spec.gamma_e) * embed(sigma(G, E), i, n) for i in range(n)]
    if spec.gamma_reg > 0:
        ops += [np.sqrt(spec.gamma_reg) * embed(sigma(R, R), i, n) for i in range(n)]
    return ops
