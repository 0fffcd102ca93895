"""Detection operators and second-order photon correlations.

Correlations are stationary: the first detection always conditions the
steady state. The numerator at delay ``tau`` is

    Tr{ O_B  exp(L tau)[ J_A(rho_ss) ] },

where ``J_A`` is the jump map of detector A and ``O_B`` the intensity
observable of detector B. For a coherent detector ``J(s) = P s P^+`` with
``P = sum_i exp(-2 pi i d.r_i) |g><e|_i``; for an incoherent detector the
jump map is the operator sum ``sum_i p_i s p_i^+`` over single-atom lowering
operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .liouville import DensityMatrix, Propagator, build_liouvillian, steady_state
from .model import SystemSpec, build_collapse_ops, build_hamiltonian
from .operators import E, G, dag, embed, ground_state, sigma, vec

RATE_EPS = 1e-12
DETECTOR_MODES = ("coherent", "incoherent_total", "incoherent_atom")
DEFAULT_TAU_MAX = 20.0
DEFAULT_TAU_POINTS = 400


def default_tau_grid(tau_max: float = DEFAULT_TAU_MAX, points: int = DEFAULT_TAU_POINTS) -> np.ndarray:
    return np.linspace(0.0, tau_max, points)


@dataclass(frozen=True)
class DetectorSpec:
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    mode: str = "incoherent_total"
    atom: int | None = None

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,):
            raise ValueError("detector direction must be a 3-vector")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("detector direction must be a unit vector")
        if abs(abs(d[2]) - 1.0) <= 1e-12:
            raise ValueError("detector must be off the probe axis")
        object.__setattr__(self, "direction", tuple(float(x) for x in d))
        if self.mode not in DETECTOR_MODES:
            raise ValueError(f"detector mode must be one of {DETECTOR_MODES}")
        if self.mode == "incoherent_atom":
            if self.atom is None or self.atom < 0:
                raise ValueError("incoherent_atom mode needs a non-negative atom index")
        elif self.atom is not None:
            raise ValueError(f"atom index only applies to incoherent_atom mode, not {self.mode}")


def atom_detector(atom: int) -> DetectorSpec:
    return DetectorSpec(mode="incoherent_atom", atom=atom)


@dataclass(frozen=True, eq=False)
class DetectionOperator:
    """Lowering operators whose jump map is ``s -> sum_k A_k s A_k^+``.

    A coherent detector carries a single ensemble operator.
    """

    ops: tuple[np.ndarray, ...]
    coherent: bool

    def jump(self, rho: np.ndarray) -> np.ndarray:
        return sum(a @ rho @ dag(a) for a in self.ops)

    def intensity(self) -> np.ndarray:
        return sum(dag(a) @ a for a in self.ops)


@dataclass
class CorrelationResult:
    tau: np.ndarray
    g2: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray
    denominator_below_threshold: bool = False
    regularized: bool = False
    stderr: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return bool(np.all(np.isfinite(self.g2)))


def detection_operator(spec: SystemSpec, det: DetectorSpec) -> DetectionOperator:
    n = spec.n_atoms
    lowering = [embed(sigma(G, E), i, n) for i in range(n)]
    if det.mode == "coherent":
        phases = np.exp(-2j * np.pi * (np.asarray(spec.positions) @ np.asarray(det.direction)))
        return DetectionOperator((sum(p * a for p, a in zip(phases, lowering)),), True)
    if det.mode == "incoherent_total":
        return DetectionOperator(tuple(lowering), False)
    if det.atom >= n:
        raise IndexError(f"detector atom {det.atom} out of range for {n} atoms")
    return DetectionOperator((lowering[det.atom],), False)


def conditional_jump(rho: DensityMatrix, d: DetectionOperator) -> DensityMatrix:
    """Unnormalized state right after a click; its trace is the click rate functional."""
    return DensityMatrix(d.jump(rho.data), normalized=False)


def _regression(spec: SystemSpec, det_a: DetectorSpec, det_b: DetectorSpec, taus, rate_eps: float) -> CorrelationResult:
    h = build_hamiltonian(spec)
    l = build_liouvillian(h, build_collapse_ops(spec))
    g = ground_state(spec.n_atoms)
    rho_ss = steady_state(l, reference=np.outer(g, g.conj()))
    da = detection_operator(spec, det_a)
    db = detection_operator(spec, det_b)
    obs_a = da.intensity()
    obs_b = db.intensity()
    rate_a = rho_ss.expect(obs_a).real
    rate_b = rho_ss.expect(obs_b).real
    denom = rate_a * rate_b
    n_tau = len(taus)
    below = min(rate_a, rate_b) < rate_eps

    cond = conditional_jump(rho_ss, da)
    states = Propagator(l).evolve(cond.data, taus)
    # Tr(O rho) = vec(O^T) . vec(rho)
    raw = states @ vec(obs_b.T)
    scale = max(np.max(np.abs(raw.real)), np.finfo(float).tiny)
    numerator = raw.real
    if below:
        g2 = np.full(n_tau, np.nan)
    else:
        g2 = numerator / denom
    return CorrelationResult(
        tau=np.asarray(taus, dtype=float),
        g2=g2,
        numerator=numerator,
        denominator=np.full(n_tau, denom),
        denominator_below_threshold=below,
        info={
            "rate_a": rate_a,
            "rate_b": rate_b,
            "imag_residue": float(np.max(np.abs(raw.imag)) / scale),
            "steady_state": rho_ss,
        },
    )


def g2(
    spec: SystemSpec,
    det_a: DetectorSpec,
    det_b: DetectorSpec,
    tau_grid=None,
    rate_eps: float = RATE_EPS,
) -> CorrelationResult:
    """Normalized two-detector intensity correlation of the steady state.

    The physical model (``gamma_reg`` ignored) is tried first. When either
    detector's steady click rate is below ``rate_eps`` the ratio is undefined
    and ``g2`` is all-NaN with ``denominator_below_threshold`` set; if
    ``spec.gamma_reg > 0`` the calculation is then repeated with the
    regularizing |r> dephasing and ``regularized`` is set.
    """
    taus = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if taus.ndim != 1 or taus.size == 0 or taus[0] < 0 or np.any(np.diff(taus) < 0):
        raise ValueError("tau_grid must be sorted and non-negative")
    result = _regression(replace(spec, gamma_reg=0.0), det_a, det_b, taus, rate_eps)
    if result.denominator_below_threshold and spec.gamma_reg > 0:
        result = _regression(spec, det_a, det_b, taus, rate_eps)
        result.denominator_below_threshold = True
        result.regularized = True
    return result


def g2_cross(spec: SystemSpec, i: int, j: int, tau_grid=None, rate_eps: float = RATE_EPS) -> CorrelationResult:
    """Correlation between photons from atom ``i`` (first) and atom ``j`` (second)."""
    for k in (i, j):
        if not 0 <= k < spec.n_atoms:
            raise IndexError(f"atom {k} out of range for {spec.n_atoms} atoms")
    return g2(spec, atom_detector(i), atom_detector(j), tau_grid, rate_eps)


SCAN_AXES = ("parallel_to_probe", "along_detector_axis")


def pair_positions(axis: str, r: float) -> tuple[tuple[float, float, float], ...]:
    if axis == "parallel_to_probe":
        return ((0.0, 0.0, -r / 2), (0.0, 0.0, r / 2))
    if axis == "along_detector_axis":
        return ((-r / 2, 0.0, 0.0), (r / 2, 0.0, 0.0))
    raise ValueError(f"axis must be one of {SCAN_AXES}")


def opposed_detectors() -> tuple[DetectorSpec, DetectorSpec]:
    return DetectorSpec((1.0, 0.0, 0.0), "coherent"), DetectorSpec((-1.0, 0.0, 0.0), "coherent")


def separation_scan(
    spec_template: SystemSpec,
    axis: str,
    r_values,
    det_a: DetectorSpec | None = None,
    det_b: DetectorSpec | None = None,
    tau_grid=None,
) -> list[CorrelationResult]:
    """Two-atom coherent correlations as a function of separation ``R`` (units of lambda_p)."""
    if spec_template.n_atoms != 2:
        raise ValueError("separation scans need exactly two atoms")
    if spec_template.phase_mode != "physical":
        raise ValueError("separation scans need phase_mode='physical'")
    if det_a is None or det_b is None:
        det_a, det_b = opposed_detectors()
    if det_a.mode != "coherent" or det_b.mode != "coherent":
        raise ValueError("separation scans need coherent detectors")
    results = []
    for r in r_values:
        spec = replace(spec_template, positions=pair_positions(axis, float(r)))
        res = g2(spec, det_a, det_b, tau_grid)
        res.info["R"] = float(r)
        results.append(res)
    return results


def double_excitation_amplitude(spec: SystemSpec, det_a: DetectorSpec, det_b: DetectorSpec) -> complex:
    """``<gg| P_B P_A |ee>`` for a coherent two-atom detector pair."""
    if spec.n_atoms != 2:
        raise ValueError("defined for two atoms")
    pa = detection_operator(spec, det_a).ops
    pb = detection_operator(spec, det_b).ops
    if len(pa) != 1 or len(pb) != 1:
        raise ValueError("needs coherent detectors")
    gg, ee = 0, 3 * E + E
    return complex((pb[0] @ pa[0])[gg, ee])
