"""Quantum-jump (Monte Carlo wavefunction) oracle.

Trajectories unravel the same master equation as :mod:`rydcorr.liouville`
into per-atom photon clicks. A coincidence histogram over the resulting click
streams gives an estimate of g2 that is independent of the regression route.

Seeding: trajectory ``k`` of a run with master seed ``s`` draws from
``PCG64(SeedSequence(s).spawn(n_traj)[k])``. Uniforms are pulled in fixed
chunks of ``UNIFORM_CHUNK``, so results depend only on ``(spec, seed, k)``
and the integration settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.integrate import trapezoid

from . import _kernels
from .correlation import CorrelationResult, g2
from .model import SystemSpec, build_collapse_ops, build_hamiltonian
from .operators import dag, ground_state

UNIFORM_CHUNK = 4096
DEFAULT_DT = 0.25


@dataclass(eq=False)
class ClickRecord:
    times: np.ndarray
    atoms: np.ndarray
    duration: float
    seed: int
    index: int = 0
    spec_hash: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.atoms = np.asarray(self.atoms, dtype=np.int64)
        if self.times.shape != self.atoms.shape:
            raise ValueError("times and atoms must have equal length")
        if self.times.size and (np.any(np.diff(self.times) <= 0) or self.times[0] < 0 or self.times[-1] > self.duration):
            raise ValueError("click times must be strictly increasing within [0, duration]")

    def __len__(self):
        return self.times.size

    @property
    def events(self) -> list[tuple[float, int]]:
        return list(zip(self.times.tolist(), self.atoms.tolist()))

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"# spec_hash={self.spec_hash} seed={self.seed} index={self.index} duration={float(self.duration)!r}\n")
            fh.write("time,atom\n")
            for t, a in zip(self.times, self.atoms):
                fh.write(f"{float(t)!r},{int(a)}\n")

    @classmethod
    def load(cls, path) -> "ClickRecord":
        lines = Path(path).read_text().splitlines()
        meta = dict(item.split("=", 1) for item in lines[0].lstrip("# ").split())
        if lines[1].strip() != "time,atom":
            raise ValueError(f"{path}: missing 'time,atom' header")
        rows = [ln.split(",") for ln in lines[2:] if ln.strip()]
        return cls(
            times=[float(t) for t, _ in rows],
            atoms=[int(a) for _, a in rows],
            duration=float(meta["duration"]),
            seed=int(meta["seed"]),
            index=int(meta["index"]),
            spec_hash=meta["spec_hash"],
        )


@dataclass
class _Unraveling:
    u_step: np.ndarray
    a_gen: np.ndarray
    a_norm: float
    cops: np.ndarray
    n_emit: int
    dt: float


def _unraveling(spec: SystemSpec, dt: float) -> _Unraveling:
    h = build_hamiltonian(spec)
    cops = build_collapse_ops(spec)
    h_eff = h - 0.5j * sum(dag(c) @ c for c in cops)
    a_gen = np.ascontiguousarray(-1j * h_eff)
    return _Unraveling(
        u_step=np.ascontiguousarray(scipy.linalg.expm(a_gen * dt)),
        a_gen=a_gen,
        a_norm=float(np.linalg.norm(a_gen, 1)),
        cops=np.ascontiguousarray(np.array(cops)),
        n_emit=spec.n_atoms,
        dt=float(dt),
    )


@dataclass
class _Trajectory:
    unr: _Unraveling
    rng: np.random.Generator
    psi: np.ndarray
    t: float = 0.0
    r: float = 0.0
    uniforms: np.ndarray = field(default_factory=lambda: np.empty(0))
    u_pos: int = 0
    ev_t: np.ndarray = field(default_factory=lambda: np.empty(1024))
    ev_c: np.ndarray = field(default_factory=lambda: np.empty(1024, dtype=np.int64))
    n_ev: int = 0

    def __post_init__(self):
        self.uniforms = self.rng.random(UNIFORM_CHUNK)
        self.r = float(self.uniforms[0])
        self.u_pos = 1

    def advance(self, t_end: float) -> None:
        u = self.unr
        while True:
            status, self.psi, self.t, self.r, self.u_pos, self.n_ev = _kernels.mcwf_segment(
                self.psi, self.t, self.r, float(t_end), u.dt, u.u_step, u.a_gen, u.a_norm,
                u.cops, u.n_emit, self.uniforms, self.u_pos, self.ev_t, self.ev_c, self.n_ev,
            )
            if status == _kernels.STATUS_DONE:
                return
            if status == _kernels.STATUS_NEED_UNIFORMS:
                self.uniforms = self.rng.random(UNIFORM_CHUNK)
                self.u_pos = 0
            else:
                self.ev_t = np.concatenate([self.ev_t, np.empty_like(self.ev_t)])
                self.ev_c = np.concatenate([self.ev_c, np.empty_like(self.ev_c)])

    def state(self) -> np.ndarray:
        return self.psi / np.linalg.norm(self.psi)


def _rngs(seed: int, n_traj: int):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n_traj)]


def _initial(spec: SystemSpec, psi0) -> np.ndarray:
    psi = ground_state(spec.n_atoms) if psi0 is None else np.asarray(psi0, dtype=complex)
    if psi.shape != (3**spec.n_atoms,):
        raise ValueError("initial state has the wrong dimension")
    return psi / np.linalg.norm(psi)


def run_trajectories(
    spec: SystemSpec,
    duration: float,
    n_traj: int,
    seed: int,
    burn_in: float = 0.0,
    dt: float = DEFAULT_DT,
    psi0=None,
) -> list[ClickRecord]:
    """Photon click records of ``n_traj`` independent trajectories.

    Each trajectory starts in ``psi0`` (default all-ground), runs for
    ``burn_in + duration`` and keeps only clicks after ``burn_in``, with
    times shifted so the record starts at zero.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")
    unr = _unraveling(spec, dt)
    psi = _initial(spec, psi0)
    spec_hash = spec.hash()
    records = []
    for k, rng in enumerate(_rngs(seed, n_traj)):
        traj = _Trajectory(unr, rng, psi.copy())
        traj.advance(burn_in + duration)
        times = traj.ev_t[: traj.n_ev]
        keep = times >= burn_in
        records.append(
            ClickRecord(times[keep] - burn_in, traj.ev_c[: traj.n_ev][keep].copy(), duration, seed, k, spec_hash)
        )
    return records


def sample_states(spec: SystemSpec, times, n_traj: int, seed: int, dt: float = DEFAULT_DT, psi0=None):
    """Trajectory-averaged density matrices at sorted ``times``.

    Returns ``(mean, stderr)`` of shape ``(len(times), d, d)``; ``stderr`` is
    the entrywise standard error of the mean, taken separately for real and
    imaginary parts.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise ValueError("times must be sorted and non-negative")
    unr = _unraveling(spec, dt)
    psi = _initial(spec, psi0)
    d = psi.size
    acc = np.zeros((times.size, d, d), dtype=complex)
    acc_sq = np.zeros((times.size, d, d), dtype=complex)
    for rng in _rngs(seed, n_traj):
        traj = _Trajectory(unr, rng, psi.copy())
        for m, t in enumerate(times):
            traj.advance(t)
            phi = traj.state()
            rho = np.outer(phi, phi.conj())
            acc[m] += rho
            acc_sq[m] += rho.real**2 + 1j * rho.imag**2
    mean = acc / n_traj
    if n_traj > 1:
        var_re = (acc_sq.real / n_traj - mean.real**2) * n_traj / (n_traj - 1)
        var_im = (acc_sq.imag / n_traj - mean.imag**2) * n_traj / (n_traj - 1)
        err = np.sqrt(np.clip(var_re, 0, None) / n_traj) + 1j * np.sqrt(np.clip(var_im, 0, None) / n_traj)
    else:
        err = np.full_like(mean, np.inf)
    return mean, err


def _mask(atoms: np.ndarray, selection) -> np.ndarray:
    if selection is None:
        return np.ones(atoms.size, dtype=bool)
    return np.isin(atoms, np.atleast_1d(selection))


def estimate_g2(
    records: list[ClickRecord],
    bin_width: float,
    tau_max: float,
    atoms_a=None,
    atoms_b=None,
    pairs: str = "all",
) -> CorrelationResult:
    """Coincidence-histogram estimate of g2 from click records.

    Every ordered pair (A-click, later B-click) inside one record contributes
    to the histogram; ``pairs="next"`` keeps only the first B-click after each
    A-click, which yields the waiting-time distribution instead of g2.
    ``atoms_a``/``atoms_b`` restrict each detector to the given atom(s);
    ``None`` means every atom.

    Counts are normalized by ``rate_A * rate_B * bin_width * sum(T - tau)``
    with rates pooled over all records. Standard errors come from the
    record-to-record spread of the counts.
    """
    if bin_width <= 0 or tau_max <= 0:
        raise ValueError("bin_width and tau_max must be positive")
    if pairs not in ("all", "next"):
        raise ValueError("pairs must be 'all' or 'next'")
    if not records or sum(len(r) for r in records) < 2:
        raise ValueError("need at least two clicks to estimate correlations")
    n_bins = int(round(tau_max / bin_width))
    edges = np.arange(n_bins + 1) * bin_width
    per_record = np.zeros((len(records), n_bins))
    n_a = n_b = 0
    total_time = 0.0
    exposure = np.zeros(n_bins)
    for m, rec in enumerate(records):
        is_a = _mask(rec.atoms, atoms_a)
        is_b = _mask(rec.atoms, atoms_b)
        n_a += int(is_a.sum())
        n_b += int(is_b.sum())
        total_time += rec.duration
        exposure += np.clip(rec.duration - edges[:-1] - 0.5 * bin_width, 0.0, None)
        per_record[m] = _kernels.pair_histogram(rec.times, is_a, is_b, bin_width, n_bins, pairs == "next")
    counts = per_record.sum(axis=0)
    rate_a = n_a / total_time
    rate_b = n_b / total_time
    expected = rate_a * rate_b * bin_width * exposure
    n_rec = len(records)
    if n_rec > 1:
        se_counts = np.sqrt(n_rec * per_record.var(axis=0, ddof=1))
    else:
        se_counts = np.sqrt(counts)
    se_counts = np.where(counts > 0, se_counts, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = counts / expected
        se = se_counts / expected
    return CorrelationResult(
        tau=0.5 * (edges[:-1] + edges[1:]),
        g2=g2,
        numerator=counts,
        denominator=expected,
        denominator_below_threshold=bool(n_a == 0 or n_b == 0),
        stderr=se,
        info={"edges": edges, "clicks_a": n_a, "clicks_b": n_b, "total_time": total_time},
    )


def regression_binned(spec: SystemSpec, det_a, det_b, edges, sub: int = 10) -> np.ndarray:
    """Regression g2 averaged over each histogram bin (trapezoid, ``sub`` panels per bin)."""
    edges = np.asarray(edges, dtype=float)
    n_bins = edges.size - 1
    fine = np.concatenate([np.linspace(edges[k], edges[k + 1], sub + 1)[:-1] for k in range(n_bins)] + [edges[-1:]])
    res = g2(spec, det_a, det_b, fine)
    vals = res.g2
    out = np.empty(n_bins)
    for k in range(n_bins):
        seg = vals[k * sub : (k + 1) * sub + 1]
        out[k] = trapezoid(seg, dx=1.0 / sub)
    return out
