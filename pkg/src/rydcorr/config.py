"""Scenario configuration: flat ``key = value`` text with dotted keys.

Grammar
-------
* one ``key = value`` per line; ``#`` starts a comment; blank lines ignored;
* keys are dotted names from :data:`SCHEMA` (``system.omega_p``); a bare
  suffix such as ``omega_p`` is accepted when it names exactly one key;
* list values are comma separated (``1,2,3``); 3-vectors inside a list of
  positions are separated by ``;`` (``0,0,0; 0.5,0,0``); a range
  ``start:stop:step`` expands inclusively;
* booleans are ``true``/``false``;
* keys under ``meta.`` are written into manifests and ignored on input.

A scenario is resolved as preset defaults, then the config file, then
``--set`` overrides, in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .correlation import DETECTOR_MODES, SCAN_AXES, DetectorSpec, default_tau_grid
from .model import MAX_ATOMS, PHASE_MODES, ExplicitV, SystemSpec, VanDerWaals, interaction_matrix


class ConfigError(ValueError):
    exit_code = 7


class UnknownPresetError(ConfigError):
    exit_code = 3


class UnknownKeyError(ConfigError):
    exit_code = 4


class MissingPresetError(ConfigError):
    exit_code = 6


KINDS = ("g2", "cross", "scan")

# key -> (parser name, help)
SCHEMA: dict[str, tuple[str, str]] = {
    "preset": ("str", "figure preset or 'custom'"),
    "system.n_atoms": ("int_list", "atom counts; one CSV column each (kind=g2)"),
    "system.omega_p": ("float_list", "probe Rabi frequencies / Gamma_e; one curve family each"),
    "system.omega_c": ("float", "coupling Rabi frequency / Gamma_e"),
    "system.gamma_e": ("float", "|e> decay rate (reference scale)"),
    "system.interaction": ("str", "explicit | vdw"),
    "system.v": ("float", "uniform pair shift of |rr> / Gamma_e (explicit)"),
    "system.c6": ("float", "C6 / (Gamma_e lambda_p^6) (vdw)"),
    "system.positions": ("positions", "atom positions / lambda_p, 'x,y,z; x,y,z'"),
    "system.k_ratio": ("float", "coupling/probe wavevector ratio"),
    "system.phase_mode": ("str", "gauged | physical"),
    "system.gamma_reg": ("float", "|r> dephasing used only for dark steady states"),
    "correlation.kind": ("str", "g2 | cross | scan"),
    "correlation.pairs": ("str_list", "cross pairs as 'i-j' (1-based), first photon from i"),
    "detector_a.direction": ("vector", "unit vector"),
    "detector_a.mode": ("str", "coherent | incoherent_total | incoherent_atom"),
    "detector_a.atom": ("int", "atom index for incoherent_atom (0-based)"),
    "detector_b.direction": ("vector", "unit vector"),
    "detector_b.mode": ("str", "coherent | incoherent_total | incoherent_atom"),
    "detector_b.atom": ("int", "atom index for incoherent_atom (0-based)"),
    "scan.axis": ("str", "parallel_to_probe | along_detector_axis"),
    "scan.r_values": ("float_list", "separations / lambda_p"),
    "tau.max": ("float", "largest delay / (1/Gamma_e)"),
    "tau.points": ("int", "uniform grid size"),
    "output.dir": ("str", "output directory"),
    "output.name": ("str", "file stem"),
    "output.plot": ("bool", "write an SVG per curve family"),
    "oracle.enabled": ("bool", "compare against quantum-jump trajectories"),
    "oracle.n_traj": ("int", "trajectories"),
    "oracle.seed": ("int", "master seed"),
    "oracle.duration": ("float", "duration per trajectory / (1/Gamma_e)"),
    "oracle.burn_in": ("float", "discarded initial time per trajectory"),
    "oracle.bin_width": ("float", "histogram bin / (1/Gamma_e)"),
    "oracle.tau_max": ("float", "histogram range / (1/Gamma_e)"),
}

BASE: dict[str, str] = {
    "system.n_atoms": "1",
    "system.omega_p": "0.2",
    "system.omega_c": "0",
    "system.gamma_e": "1",
    "system.interaction": "explicit",
    "system.v": "0",
    "system.c6": "0",
    "system.positions": "",
    "system.k_ratio": "1",
    "system.phase_mode": "gauged",
    "system.gamma_reg": "0",
    "correlation.kind": "g2",
    "correlation.pairs": "1-1,2-1",
    "detector_a.direction": "1,0,0",
    "detector_a.mode": "incoherent_total",
    "detector_a.atom": "",
    "detector_b.direction": "-1,0,0",
    "detector_b.mode": "incoherent_total",
    "detector_b.atom": "",
    "scan.axis": "along_detector_axis",
    "scan.r_values": "0.05:1.0:0.05",
    "tau.max": "20",
    "tau.points": "400",
    "output.dir": "results",
    "output.name": "",
    "output.plot": "false",
    "oracle.enabled": "false",
    "oracle.n_traj": "100",
    "oracle.seed": "1234",
    "oracle.duration": "20000",
    "oracle.burn_in": "50",
    "oracle.bin_width": "0.1",
    "oracle.tau_max": "10",
}

_BLOCKADE = {"system.omega_c": "1", "system.v": "2"}

PRESETS: dict[str, dict] = {
    "fig2a": {
        "anchor": "independent two-level atoms, N=1..3, Omega_p=Gamma_e/5, incoherent detection",
        "values": {"system.n_atoms": "1,2,3", "system.omega_p": "0.2"},
    },
    "fig2bcd": {
        "anchor": "blockaded EIT, Omega_c=Gamma_e, V=2Gamma_e, Omega_p=Gamma_e/5, Gamma_e/2, Gamma_e, N=1..3",
        "values": {
            "system.n_atoms": "1,2,3",
            "system.omega_p": "0.2,0.5,1.0",
            "system.gamma_reg": "0.001",
            **_BLOCKADE,
        },
    },
    "fig3": {
        "anchor": "self/cross correlations of an EIT pair, Omega_c=Gamma_e, V=2Gamma_e, three probe strengths",
        "values": {
            "system.n_atoms": "2",
            "system.omega_p": "0.2,0.5,1.0",
            "correlation.kind": "cross",
            **_BLOCKADE,
        },
    },
    "fig4a": {
        "anchor": "coherent emission, pair along the probe axis, Omega_p=Gamma_e/2, Omega_c=Gamma_e, V=2Gamma_e",
        "values": {
            "system.n_atoms": "2",
            "system.omega_p": "0.5",
            "system.phase_mode": "physical",
            "correlation.kind": "scan",
            "scan.axis": "parallel_to_probe",
            "detector_a.mode": "coherent",
            "detector_b.mode": "coherent",
            **_BLOCKADE,
        },
    },
    "fig4b": {
        "anchor": "coherent emission, pair along the opposed-detector axis, Omega_p=Gamma_e/2, Omega_c=Gamma_e, V=2Gamma_e",
        "values": {
            "system.n_atoms": "2",
            "system.omega_p": "0.5",
            "system.phase_mode": "physical",
            "correlation.kind": "scan",
            "scan.axis": "along_detector_axis",
            "detector_a.mode": "coherent",
            "detector_b.mode": "coherent",
            **_BLOCKADE,
        },
    },
    "custom": {
        "anchor": "no figure; defaults are a single two-level atom, override everything with --set",
        "values": {},
    },
}


def canonical_key(key: str) -> str:
    key = key.strip()
    if key in SCHEMA or key.startswith("meta."):
        return key
    matches = [k for k in SCHEMA if k.endswith("." + key)]
    if len(matches) == 1:
        return matches[0]
    if len(matches) > 1:
        raise UnknownKeyError(f"ambiguous key '{key}': could be {', '.join(matches)}")
    raise UnknownKeyError(f"unknown config key '{key}'")


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[canonical_key(key)] = value.strip()
    return out


def parse_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form key=value")
    key, value = item.split("=", 1)
    return canonical_key(key), value.strip()


def format_text(values: dict[str, str]) -> str:
    return "".join(f"{k} = {values[k]}\n" for k in sorted(values))


def _float(s: str) -> float:
    return float(s)


def _expand(token: str) -> list[float]:
    if ":" in token:
        start, stop, step = (float(x) for x in token.split(":"))
        n = int(round((stop - start) / step))
        return [round(start + k * step, 12) for k in range(n + 1)]
    return [float(token)]


def _parse(kind: str, key: str, raw: str):
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw) if raw else None
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError("expected true or false")
            return raw.lower() == "true"
        if kind == "int_list":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "float_list":
            return [v for tok in raw.split(",") if tok.strip() for v in _expand(tok.strip())]
        if kind == "str_list":
            return [x.strip() for x in raw.split(",") if x.strip()]
        if kind == "vector":
            v = [float(x) for x in raw.split(",")]
            if len(v) != 3:
                raise ValueError("expected three components")
            return tuple(v)
        if kind == "positions":
            if not raw.strip():
                return None
            vecs = [tuple(float(x) for x in chunk.split(",")) for chunk in raw.split(";")]
            if any(len(v) != 3 for v in vecs):
                raise ValueError("each position needs three components")
            return tuple(vecs)
    except ValueError as exc:
        raise ConfigError(f"invalid value for '{key}': {raw!r} ({exc})") from None
    raise AssertionError(kind)


@dataclass
class Scenario:
    """Resolved configuration with typed accessors."""

    preset: str
    values: dict[str, str]

    def get(self, key: str):
        return _parse(SCHEMA[key][0], key, self.values[key])

    @property
    def kind(self) -> str:
        return self.get("correlation.kind")

    @property
    def name(self) -> str:
        return self.values["output.name"] or self.preset

    def tau_grid(self) -> np.ndarray:
        return default_tau_grid(self.get("tau.max"), self.get("tau.points"))

    def detector(self, which: str) -> DetectorSpec:
        return DetectorSpec(
            self.get(f"detector_{which}.direction"),
            self.get(f"detector_{which}.mode"),
            self.get(f"detector_{which}.atom"),
        )

    def system(self, n_atoms: int, omega_p: float) -> SystemSpec:
        if self.get("system.interaction") == "vdw":
            interaction = VanDerWaals(self.get("system.c6"))
        else:
            interaction = ExplicitV.uniform(n_atoms, self.get("system.v"))
        return SystemSpec(
            n_atoms=n_atoms,
            omega_p=omega_p,
            omega_c=self.get("system.omega_c"),
            gamma_e=self.get("system.gamma_e"),
            interaction=interaction,
            positions=self.get("system.positions"),
            k_ratio=self.get("system.k_ratio"),
            phase_mode=self.get("system.phase_mode"),
            gamma_reg=self.get("system.gamma_reg"),
        )

    def pairs(self) -> list[tuple[int, int]]:
        out = []
        for item in self.get("correlation.pairs"):
            try:
                i, j = (int(x) for x in item.split("-"))
            except ValueError:
                raise ConfigError(f"invalid value for 'correlation.pairs': {item!r}") from None
            out.append((i, j))
        return out


def _check(sc: Scenario) -> None:
    for key in sc.values:
        if not key.startswith("meta."):
            sc.get(key)
    n_list = sc.get("system.n_atoms")
    if not n_list:
        raise ConfigError("'system.n_atoms' is empty")
    for n in n_list:
        if not 1 <= n <= MAX_ATOMS:
            raise ConfigError(f"invalid value for 'system.n_atoms': {n} (supported range is 1..{MAX_ATOMS}, N <= {MAX_ATOMS})")
    if not sc.get("system.omega_p"):
        raise ConfigError("'system.omega_p' is empty")
    if sc.kind not in KINDS:
        raise ConfigError(f"invalid value for 'correlation.kind': {sc.kind!r} (one of {KINDS})")
    if sc.get("system.interaction") not in ("explicit", "vdw"):
        raise ConfigError("invalid value for 'system.interaction' (explicit | vdw)")
    if sc.get("system.phase_mode") not in PHASE_MODES:
        raise ConfigError(f"invalid value for 'system.phase_mode' (one of {PHASE_MODES})")
    if sc.kind == "scan" and sc.get("scan.axis") not in SCAN_AXES:
        raise ConfigError(f"invalid value for 'scan.axis' (one of {SCAN_AXES})")
    if sc.kind in ("cross", "scan") and len(n_list) != 1:
        raise ConfigError(f"'system.n_atoms' must be a single value for kind={sc.kind}")
    if sc.kind == "cross":
        for i, j in sc.pairs():
            if not (1 <= i <= n_list[0] and 1 <= j <= n_list[0]):
                raise ConfigError(f"invalid value for 'correlation.pairs': {i}-{j} out of range")
    for which in ("a", "b"):
        if sc.get(f"detector_{which}.mode") not in DETECTOR_MODES:
            raise ConfigError(f"invalid value for 'detector_{which}.mode' (one of {DETECTOR_MODES})")
        try:
            sc.detector(which)
        except ValueError as exc:
            raise ConfigError(f"invalid detector_{which}: {exc}") from None
    if sc.get("tau.points") < 2 or sc.get("tau.max") <= 0:
        raise ConfigError("invalid tau grid: need tau.max > 0 and tau.points >= 2")
    for n in n_list:
        for op in sc.get("system.omega_p"):
            try:
                spec = sc.system(n, op)
                interaction_matrix(spec)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid system for n_atoms={n}, omega_p={op}: {exc}") from None


def resolve(file_values: dict[str, str] | None = None, overrides: dict[str, str] | None = None) -> Scenario:
    merged = dict(file_values or {})
    merged.update(overrides or {})
    preset = merged.pop("preset", None)
    if not preset:
        raise MissingPresetError("missing required key 'preset' (use 'rydcorr presets' to list them)")
    if preset not in PRESETS:
        raise UnknownPresetError(f"unknown preset '{preset}' (choose from {', '.join(PRESETS)})")
    values = dict(BASE)
    values.update(PRESETS[preset]["values"])
    values.update({k: v for k, v in merged.items() if not k.startswith("meta.")})
    sc = Scenario(preset, values)
    _check(sc)
    return sc


def load(path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_text(text, str(p))
