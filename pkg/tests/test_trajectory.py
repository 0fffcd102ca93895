import os
import subprocess
import sys

import numpy as np
import pytest

from rydcorr import _kernels
from rydcorr.correlation import DetectorSpec, atom_detector
from rydcorr.liouville import DensityMatrix, build_liouvillian, propagate, steady_state
from rydcorr.model import SystemSpec, blockaded, build_collapse_ops, build_hamiltonian, two_level
from rydcorr.operators import E, ground_state
from rydcorr.trajectory import (
    ClickRecord,
    _initial,
    _rngs,
    _Trajectory,
    _unraveling,
    estimate_g2,
    regression_binned,
    run_trajectories,
    sample_states,
)

TOTAL = DetectorSpec()


def liouvillian(spec):
    return build_liouvillian(build_hamiltonian(spec), build_collapse_ops(spec))


def test_no_probe_no_clicks():
    for rec in run_trajectories(SystemSpec(2, 0.0, 1.0), 200.0, 5, seed=3):
        assert len(rec) == 0


def test_argument_validation():
    with pytest.raises(ValueError):
        run_trajectories(two_level(1, 0.2), 0.0, 1, seed=0)
    with pytest.raises(ValueError):
        run_trajectories(two_level(1, 0.2), 1.0, 0, seed=0)
    with pytest.raises(ValueError):
        estimate_g2([], 0.1, 1.0)
    rec = ClickRecord(np.array([1.0]), np.array([0]), 2.0, 0)
    with pytest.raises(ValueError):
        estimate_g2([rec], 0.1, 1.0)


def test_click_record_validation():
    with pytest.raises(ValueError):
        ClickRecord(np.array([1.0, 1.0]), np.array([0, 0]), 2.0, 0)
    with pytest.raises(ValueError):
        ClickRecord(np.array([3.0]), np.array([0]), 2.0, 0)


def test_two_level_click_rate():
    omega = 0.2
    recs = run_trajectories(two_level(1, omega), 2000.0, 20, seed=11, burn_in=20.0)
    rates = np.array([len(r) / r.duration for r in recs])
    rho = steady_state(liouvillian(two_level(1, omega)), reference=DensityMatrix.pure(ground_state(1)).data)
    expected = rho.data[E, E].real
    se = rates.std(ddof=1) / np.sqrt(rates.size)
    assert abs(rates.mean() - expected) < 3 * se


def test_state_average_matches_master_equation():
    spec = blockaded(2, 0.5)
    mean, err = sample_states(spec, [5.0], n_traj=2000, seed=7)
    rho = propagate(DensityMatrix.pure(ground_state(2)), liouvillian(spec), 5.0).data
    diff = mean[0] - rho
    assert np.all(np.abs(diff.real) <= 3 * err[0].real + 1e-10)
    assert np.all(np.abs(diff.imag) <= 3 * err[0].imag + 1e-10)


def test_norm_conserved_between_jumps():
    spec = blockaded(2, 1.0)
    unr = _unraveling(spec, 0.25)
    (rng,) = _rngs(5, 1)
    traj = _Trajectory(unr, rng, _initial(spec, None))
    last = 0
    for t in np.arange(1.0, 200.0, 0.7):
        traj.advance(t)
        # the unnormalized drift never grows the norm; jumps reset it to one
        assert np.linalg.norm(traj.psi) <= 1 + 1e-9
        assert abs(np.linalg.norm(traj.state()) - 1) < 1e-9
        assert traj.n_ev >= last
        last = traj.n_ev
    assert last > 10


def test_seed_reproducibility_bit_exact():
    spec = blockaded(2, 0.5)
    a = run_trajectories(spec, 300.0, 3, seed=42)
    b = run_trajectories(spec, 300.0, 3, seed=42)
    c = run_trajectories(spec, 300.0, 3, seed=43)
    for x, y in zip(a, b):
        assert x.times.tobytes() == y.times.tobytes()
        assert np.array_equal(x.atoms, y.atoms)
    assert any(len(x) != len(z) or not np.array_equal(x.times, z.times) for x, z in zip(a, c))


def test_click_record_round_trip(tmp_path):
    (rec,) = run_trajectories(blockaded(2, 0.5), 100.0, 1, seed=9)
    path = tmp_path / "clicks.csv"
    rec.save(path)
    back = ClickRecord.load(path)
    assert back.times.tobytes() == rec.times.tobytes()
    assert np.array_equal(back.atoms, rec.atoms)
    assert (back.duration, back.seed, back.index, back.spec_hash) == (rec.duration, rec.seed, rec.index, rec.spec_hash)
    head = path.read_text().splitlines()[0]
    assert head.startswith("#") and "seed=9" in head and rec.spec_hash in head


def test_poisson_stream_is_uncorrelated():
    rng = np.random.default_rng(2)
    recs = []
    for k in range(20):
        t = np.cumsum(rng.exponential(1.0, size=3000))
        t = t[t < 2500.0]
        recs.append(ClickRecord(t, np.zeros(t.size, dtype=np.int64), 2500.0, 2, k))
    res = estimate_g2(recs, 0.5, 10.0)
    z = (res.g2 - 1) / res.stderr
    assert np.all(np.abs(z) < 4)
    assert abs(np.mean(res.g2) - 1) < 0.02


def test_histogram_numpy_matches_loop(rng):
    times = np.sort(rng.uniform(0, 100, size=400))
    times = np.unique(times)
    atoms = rng.integers(0, 2, size=times.size)
    is_a, is_b = atoms == 0, atoms == 1
    for next_only in (False, True):
        ref = np.zeros(30)
        for i in np.flatnonzero(is_a):
            for j in range(i + 1, times.size):
                if not is_b[j]:
                    continue
                k = int((times[j] - times[i]) // 0.2)
                if k < 30:
                    ref[k] += 1
                if next_only:
                    break
        fast = _kernels._pair_hist_numpy(times, is_a, is_b, 0.2, 30, next_only)
        assert np.array_equal(fast, ref)
        assert np.array_equal(_kernels.pair_histogram(times, is_a, is_b, 0.2, 30, next_only), ref)


def test_numpy_backend_reproduces_clicks():
    code = (
        "import numpy as np;"
        "from rydcorr.model import blockaded;"
        "from rydcorr.trajectory import run_trajectories;"
        "r = run_trajectories(blockaded(2, 0.5), 200.0, 2, seed=4);"
        "print(np.concatenate([x.times for x in r]).tobytes().hex())"
    )
    env = dict(os.environ, RYDCORR_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    here = run_trajectories(blockaded(2, 0.5), 200.0, 2, seed=4)
    expected = np.concatenate([x.times for x in here])
    got = np.frombuffer(bytes.fromhex(out.stdout.strip()), dtype=float)
    assert np.allclose(got, expected, rtol=0, atol=1e-9)


@pytest.fixture(scope="module")
def two_level_records():
    return run_trajectories(two_level(1, 0.5), 4000.0, 20, seed=101, burn_in=20.0)


def test_two_level_histogram_matches_regression(two_level_records):
    res = estimate_g2(two_level_records, 0.5, 10.0)
    ref = regression_binned(two_level(1, 0.5), TOTAL, TOTAL, res.info["edges"])
    z = (res.g2 - ref) / res.stderr
    assert np.all(np.abs(z) < 3)
    # 99% quantile of chi2 with 20 degrees of freedom
    assert np.sum(z**2) < 37.57
    assert res.g2[0] < 0.2


def test_all_pairs_differ_from_next_pairs(two_level_records):
    full = estimate_g2(two_level_records, 0.25, 10.0, pairs="all")
    nxt = estimate_g2(two_level_records, 0.25, 10.0, pairs="next")
    # successive-click histogram decays at long delay, the all-pairs one does not
    assert abs(full.g2[-5:].mean() - 1) < 0.1
    assert nxt.g2[-5:].mean() < 0.7
    assert np.all(nxt.numerator <= full.numerator)


@pytest.mark.slow
def test_blockaded_cross_correlation_matches_regression():
    spec = blockaded(2, 0.2)
    recs = run_trajectories(spec, 25000.0, 40, seed=2024, burn_in=50.0)
    res = estimate_g2(recs, 0.5, 10.0, atoms_a=0, atoms_b=1)
    ref = regression_binned(spec, atom_detector(0), atom_detector(1), res.info["edges"])
    z = (res.g2 - ref) / res.stderr
    assert np.all(np.abs(z) < 3)
    assert res.g2[0] > 10
