"""Command line interface: ``rydcorr {run,validate,presets}``.

Exit codes: 0 success, 2 usage, 3 unknown preset, 4 unknown/ambiguous key,
5 unwritable output, 6 missing preset, 7 invalid value.

Environment: ``RYDCORR_OUTPUT_DIR`` and ``RYDCORR_WORKERS`` set the output
directory and worker count; ``--output-dir`` and ``--workers`` win over both.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, config, runner

ENV_OUTPUT_DIR = "RYDCORR_OUTPUT_DIR"
ENV_WORKERS = "RYDCORR_WORKERS"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rydcorr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rydcorr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "compute and write results"), ("validate", "resolve config and estimate cost")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--preset", help="figure preset (see 'presets')")
        sp.add_argument("--config", type=Path, help="key = value config or manifest file")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--output-dir", type=Path)
        sp.add_argument("--workers", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("presets", help="list presets")
    return p


def _scenario(args) -> config.Scenario:
    values = config.load(args.config) if args.config else {}
    if args.preset:
        values["preset"] = args.preset
    overrides = dict(config.parse_assignment(item) for item in args.overrides)
    env_dir = os.environ.get(ENV_OUTPUT_DIR)
    if env_dir:
        values["output.dir"] = env_dir
    if args.output_dir is not None:
        overrides["output.dir"] = str(args.output_dir)
    return config.resolve(values, overrides)


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    try:
        return max(1, int(os.environ.get(ENV_WORKERS, "1")))
    except ValueError:
        raise config.ConfigError(f"invalid value for {ENV_WORKERS}: {os.environ[ENV_WORKERS]!r}") from None


def cmd_presets() -> int:
    for name, entry in config.PRESETS.items():
        print(f"{name:8s} {entry['anchor']}")
    return 0


def cmd_validate(sc: config.Scenario) -> int:
    print(f"preset = {sc.preset}")
    print(f"kind = {sc.kind}")
    n_list = [2] if sc.kind == "scan" else sc.get("system.n_atoms")
    for n in n_list:
        for op in sc.get("system.omega_p"):
            spec = sc.system(n, op)
            fields = ", ".join(f"{k}={v}" for k, v in spec.to_dict().items())
            print(f"SystemSpec({fields})")
    if sc.kind == "scan":
        r = sc.get("scan.r_values")
        print(f"scan: axis={sc.get('scan.axis')}, {len(r)} separations in [{min(r)}, {max(r)}]")
    print(f"detector_a = {sc.detector('a')}")
    print(f"detector_b = {sc.detector('b')}")
    for row in runner.estimate(sc):
        print(
            f"N={row['n_atoms']}: d={row['d']}, d^2={row['d2']}, tau points={row['tau_points']}, "
            f"~{row['superop_mib']:.1f} MiB, ~{row['seconds_per_curve']:.2g} s per curve"
        )
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "presets":
        return cmd_presets()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        sc = _scenario(args)
        workers = _workers(args)
        if args.command == "validate":
            return cmd_validate(sc)
        manifest = runner.run(sc, Path(sc.values["output.dir"]), workers)
    except config.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except runner.OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for name in manifest["meta.files"].split(","):
        print(Path(sc.values["output.dir"]) / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
