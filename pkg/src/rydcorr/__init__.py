"""Photon correlations of Rydberg-blockaded three-level ladder atoms."""

__version__ = "0.1.0"

from .correlation import (  # noqa: E402
    CorrelationResult,
    DetectorSpec,
    conditional_jump,
    detection_operator,
    g2,
    g2_cross,
    separation_scan,
)
from .liouville import DensityMatrix, build_liouvillian, propagate, steady_state  # noqa: E402
from .model import (  # noqa: E402
    ExplicitV,
    SystemSpec,
    VanDerWaals,
    blockade_radius,
    blockaded,
    build_collapse_ops,
    build_hamiltonian,
    interaction_matrix,
    two_level,
)
from .trajectory import ClickRecord, estimate_g2, run_trajectories  # noqa: E402

__all__ = [
    "ClickRecord",
    "CorrelationResult",
    "DensityMatrix",
    "DetectorSpec",
    "ExplicitV",
    "SystemSpec",
    "VanDerWaals",
    "blockade_radius",
    "blockaded",
    "build_collapse_ops",
    "build_hamiltonian",
    "build_liouvillian",
    "conditional_jump",
    "detection_operator",
    "estimate_g2",
    "g2",
    "g2_cross",
    "interaction_matrix",
    "propagate",
    "run_trajectories",
    "separation_scan",
    "steady_state",
    "two_level",
]
