"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is read once at
import time from ``RYDCORR_DISABLE_NUMBA``.

    python3 benchmarks/bench_kernels.py [--duration 20000] [--n-traj 4]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from rydcorr._accel import backend_name
from rydcorr.model import blockaded
from rydcorr.trajectory import estimate_g2, run_trajectories

duration, n_traj = float(sys.argv[1]), int(sys.argv[2])
spec = blockaded(2, 0.2)
estimate_g2(run_trajectories(spec, 2000.0, 1, seed=0), 0.1, 10.0)  # compile / warm caches
t0 = time.perf_counter()
recs = run_trajectories(spec, duration, n_traj, seed=1)
t1 = time.perf_counter()
estimate_g2(recs, 0.1, 10.0)
t2 = time.perf_counter()
clicks = sum(len(r) for r in recs)
print(json.dumps({"backend": backend_name(), "clicks": clicks, "trajectories_s": t1 - t0, "histogram_s": t2 - t1,
                  "checksum": float(np.sum([r.times.sum() for r in recs]))}))
"""


def run(disable: bool, duration: float, n_traj: int) -> dict:
    env = dict(os.environ, RYDCORR_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run(
        [sys.executable, "-c", WORKER, str(duration), str(n_traj)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--duration", type=float, default=20000.0)
    p.add_argument("--n-traj", type=int, default=4)
    args = p.parse_args()
    rows = [run(False, args.duration, args.n_traj), run(True, args.duration, args.n_traj)]
    print(f"{'backend':8s} {'clicks':>8s} {'trajectories [s]':>17s} {'histogram [s]':>14s}")
    for r in rows:
        print(f"{r['backend']:8s} {r['clicks']:8d} {r['trajectories_s']:17.3f} {r['histogram_s']:14.3f}")
    fast, slow = rows
    print(f"speedup: trajectories x{slow['trajectories_s'] / fast['trajectories_s']:.1f}, "
          f"histogram x{slow['histogram_s'] / max(fast['histogram_s'], 1e-9):.1f}")
    if abs(fast["checksum"] - slow["checksum"]) > 1e-6 * abs(fast["checksum"]):
        print("warning: backends produced different click streams")


if __name__ == "__main__":
    main()
