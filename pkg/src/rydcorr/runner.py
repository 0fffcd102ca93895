"""Batch execution of resolved scenarios: CSV, manifest, plots, oracle reports."""

from __future__ import annotations

import hashlib
import io
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import Scenario, format_text
from .correlation import DetectorSpec, atom_detector, g2, separation_scan
from .model import SystemSpec
from .trajectory import estimate_g2, regression_binned, run_trajectories

log = logging.getLogger(__name__)


class OutputError(OSError):
    exit_code = 5


def fmt(x: float) -> str:
    """Decimal, 12 significant digits, locale independent."""
    if not np.isfinite(x):
        return "nan"
    return np.format_float_positional(float(x), precision=12, unique=False, fractional=False, trim="-")


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write output path {path}: {exc}") from None


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


def _status(res) -> str:
    if res.regularized:
        return "regularized"
    if res.denominator_below_threshold:
        return "undefined"
    return "ok"


def _families(sc: Scenario) -> list[tuple[str, float]]:
    ops = sc.get("system.omega_p")
    if len(ops) == 1:
        return [(sc.name, ops[0])]
    return [(f"{sc.name}_op{fmt(op)}", op) for op in ops]


def _columns(sc: Scenario, omega_p: float) -> list[tuple[str, SystemSpec, DetectorSpec, DetectorSpec]]:
    if sc.kind == "g2":
        det_a, det_b = sc.detector("a"), sc.detector("b")
        return [(f"g2_N{n}", sc.system(n, omega_p), det_a, det_b) for n in sc.get("system.n_atoms")]
    if sc.kind == "cross":
        spec = sc.system(sc.get("system.n_atoms")[0], omega_p)
        return [(f"g{i}{j}", spec, atom_detector(i - 1), atom_detector(j - 1)) for i, j in sc.pairs()]
    raise ValueError(sc.kind)


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _oracle_atoms(det: DetectorSpec):
    return det.atom if det.mode == "incoherent_atom" else None


def _oracle(sc: Scenario, spec: SystemSpec, det_a, det_b, res) -> tuple[str, float, int]:
    used = spec if res.regularized else replace(spec, gamma_reg=0.0)
    records = run_trajectories(
        used,
        sc.get("oracle.duration"),
        sc.get("oracle.n_traj"),
        sc.get("oracle.seed"),
        burn_in=sc.get("oracle.burn_in"),
    )
    est = estimate_g2(
        records,
        sc.get("oracle.bin_width"),
        sc.get("oracle.tau_max"),
        _oracle_atoms(det_a),
        _oracle_atoms(det_b),
    )
    edges = est.info["edges"]
    reg = regression_binned(used, det_a, det_b, edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (est.g2 - reg) / est.stderr
    rows = zip(edges[:-1], edges[1:], est.g2, est.stderr, reg, z)
    text = _csv(["tau_lo", "tau_hi", "g2_trajectory", "stderr", "g2_regression", "z"], rows)
    max_z = float(np.nanmax(np.abs(z))) if np.any(np.isfinite(z)) else float("nan")
    return text, max_z, int(est.info["clicks_a"])


def _plot(path: Path, x, curves: dict[str, np.ndarray], xlabel: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "rydcorr"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, y in curves.items():
        ax.plot(x, y, label=label)
    ax.axhline(1.0, color="0.5", lw=0.8, ls="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    write_atomic(path, buf.getvalue())


def scenario_hash(sc: Scenario) -> str:
    # where results go does not change what they are
    values = {k: v for k, v in sc.values.items() if not k.startswith("output.")}
    blob = format_text({"preset": sc.preset, **values})
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run(sc: Scenario, out_dir: Path, workers: int = 1) -> dict[str, str]:
    """Compute every curve family of ``sc`` and write the outputs.

    Returns the manifest as a key-value dict (also written to ``manifest.txt``).
    """
    out_dir = Path(out_dir)
    taus = sc.tau_grid()
    manifest = {"preset": sc.preset, **sc.values}
    manifest["output.dir"] = str(out_dir)
    manifest["meta.version"] = __version__
    manifest["meta.spec_hash"] = scenario_hash(sc)
    files = []
    do_plot = sc.get("output.plot")

    for family, omega_p in _families(sc):
        if sc.kind == "scan":
            spec = sc.system(2, omega_p)
            r_values = sc.get("scan.r_values")
            axis = sc.get("scan.axis")
            # one task per separation so workers can split the scan
            tasks = [("scan", spec, sc.detector("a"), sc.detector("b"), taus, axis, [r]) for r in r_values]
            results = [res[0] for res in _map(_scan_task, tasks, workers)]
            rows = ((r, t, v) for r, res in zip(r_values, results) for t, v in zip(res.tau, res.g2))
            files.append(f"{family}.csv")
            write_atomic(out_dir / files[-1], _csv(["R_over_lambda", "tau", "g2"], rows))
            for r, res in zip(r_values, results):
                manifest[f"meta.flags.{family}.R{fmt(r)}"] = _status(res)
            if do_plot:
                files.append(f"{family}.svg")
                _plot(out_dir / files[-1], r_values, {"g2(0)": [res.g2[0] for res in results]}, "R / lambda_p", "g2(0)")
            continue

        cols = _columns(sc, omega_p)
        tasks = [(name, spec, det_a, det_b, taus) for name, spec, det_a, det_b in cols]
        results = _map(_g2_task, tasks, workers)
        header = ["tau"] + [name for name, *_ in cols]
        rows = zip(taus, *(res.g2 for res in results))
        files.append(f"{family}.csv")
        write_atomic(out_dir / files[-1], _csv(header, rows))
        for (name, *_), res in zip(cols, results):
            manifest[f"meta.flags.{family}.{name}"] = _status(res)
        if do_plot:
            files.append(f"{family}.svg")
            _plot(out_dir / files[-1], taus, {name: res.g2 for (name, *_), res in zip(cols, results)}, "tau Gamma_e", "g2(tau)")

        if sc.get("oracle.enabled"):
            for (name, spec, det_a, det_b), res in zip(cols, results):
                if det_a.mode == "coherent" or det_b.mode == "coherent":
                    log.warning("oracle skipped for %s: coherent detection has no trajectory unraveling", name)
                    continue
                if not res.defined and not res.regularized:
                    manifest[f"meta.oracle.{family}.{name}"] = "skipped_undefined"
                    continue
                text, max_z, clicks = _oracle(sc, spec, det_a, det_b, res)
                files.append(f"{family}_oracle_{name}.csv")
                write_atomic(out_dir / files[-1], text)
                manifest[f"meta.oracle.{family}.{name}.max_abs_z"] = fmt(max_z)
                manifest[f"meta.oracle.{family}.{name}.clicks"] = str(clicks)

    manifest["meta.files"] = ",".join(files)
    write_atomic(out_dir / "manifest.txt", format_text(manifest))
    return manifest


def _g2_task(task):
    _name, spec, det_a, det_b, taus = task
    return g2(spec, det_a, det_b, taus)


def _scan_task(task):
    _kind, spec, det_a, det_b, taus, axis, r_values = task
    return separation_scan(spec, axis, r_values, det_a, det_b, taus)


SVD_SECONDS_PER_FLOP = 1.8e-9


def estimate(sc: Scenario) -> list[dict]:
    """Rough cost of each distinct Hilbert-space size in the scenario."""
    rows = []
    n_list = [2] if sc.kind == "scan" else sc.get("system.n_atoms")
    for n in n_list:
        d = 3**n
        d2 = d * d
        rows.append(
            {
                "n_atoms": n,
                "d": d,
                "d2": d2,
                "tau_points": sc.get("tau.points"),
                "superop_mib": 3 * d2 * d2 * 16 / 2**20,
                "seconds_per_curve": 2 * SVD_SECONDS_PER_FLOP * d2**3,
            }
        )
    return rows
