"""Hot loops of the trajectory oracle.

Each kernel is plain numpy-compatible Python; ``_accel.njit`` compiles it
unless numba is disabled. The pair-histogram kernel also has a vectorized
numpy twin that is used on the fallback path.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

JUMP_TIME_TOL = 1e-10

STATUS_DONE = 0
STATUS_NEED_UNIFORMS = 1
STATUS_EVENTS_FULL = 2


@njit
def _norm2(v):
    acc = 0.0
    for k in range(v.shape[0]):
        acc += v[k].real * v[k].real + v[k].imag * v[k].imag
    return acc


@njit
def _expm_apply(a, a_norm, psi, s):
    """``exp(a s) psi`` by substepped Taylor series, ``|a| h <= 1/2`` per substep."""
    m = int(math.ceil(a_norm * s / 0.5))
    if m < 1:
        m = 1
    h = s / m
    v = psi.copy()
    for _ in range(m):
        term = v.copy()
        acc = v.copy()
        for k in range(1, 40):
            term = (a @ term) * (h / k)
            acc += term
            if _norm2(term) < 1e-34 * _norm2(acc):
                break
        v = acc
    return v


@njit
def mcwf_segment(psi, t, r, t_end, dt, u_step, a_gen, a_norm, cops, n_emit, uniforms, u_pos, ev_t, ev_c, n_ev):
    """Advance one quantum-jump trajectory from ``t`` to ``t_end``.

    ``psi`` is the unnormalized no-jump state; a jump fires when its squared
    norm reaches the threshold ``r``. Jump times are located by bisection.
    Channels ``0..n_emit-1`` are photon emissions and are logged into
    ``ev_t``/``ev_c``; later channels jump silently.

    Returns ``(status, psi, t, r, u_pos, n_ev)``. A non-zero status means the
    uniform buffer or the event buffer ran out; the caller refills and calls
    again with the returned state.
    """
    n_ch = cops.shape[0]
    weights = np.empty(n_ch)
    while t_end - t > 1e-13:
        if u_pos + 2 > uniforms.shape[0]:
            return STATUS_NEED_UNIFORMS, psi, t, r, u_pos, n_ev
        if n_ev >= ev_t.shape[0]:
            return STATUS_EVENTS_FULL, psi, t, r, u_pos, n_ev
        h = dt
        if t + dt > t_end:
            h = t_end - t
            nxt = _expm_apply(a_gen, a_norm, psi, h)
        else:
            nxt = u_step @ psi
        if _norm2(nxt) > r:
            psi = nxt
            t += h
            continue
        lo = 0.0
        hi = h
        while hi - lo > JUMP_TIME_TOL:
            mid = 0.5 * (lo + hi)
            if _norm2(_expm_apply(a_gen, a_norm, psi, mid)) > r:
                lo = mid
            else:
                hi = mid
        psi = _expm_apply(a_gen, a_norm, psi, hi)
        t += hi
        total = 0.0
        for k in range(n_ch):
            weights[k] = _norm2(cops[k] @ psi)
            total += weights[k]
        x = uniforms[u_pos] * total
        u_pos += 1
        ch = n_ch - 1
        acc = 0.0
        for k in range(n_ch):
            acc += weights[k]
            if x < acc:
                ch = k
                break
        psi = cops[ch] @ psi
        psi = psi / math.sqrt(_norm2(psi))
        r = uniforms[u_pos]
        u_pos += 1
        if ch < n_emit:
            ev_t[n_ev] = t
            ev_c[n_ev] = ch
            n_ev += 1
    return STATUS_DONE, psi, t, r, u_pos, n_ev


@njit
def _pair_hist_loop(times, is_a, is_b, bin_width, n_bins, next_only):
    counts = np.zeros(n_bins, dtype=np.int64)
    tau_max = bin_width * n_bins
    n = times.shape[0]
    for i in range(n):
        if not is_a[i]:
            continue
        for j in range(i + 1, n):
            lag = times[j] - times[i]
            if lag >= tau_max:
                break
            if not is_b[j]:
                continue
            k = int(lag / bin_width)
            if k < n_bins:
                counts[k] += 1
            if next_only:
                break
    return counts


def _pair_hist_numpy(times, is_a, is_b, bin_width, n_bins, next_only):
    counts = np.zeros(n_bins, dtype=np.int64)
    n = times.size
    if n < 2:
        return counts
    tau_max = bin_width * n_bins
    reach = np.searchsorted(times, times + tau_max, side="left") - np.arange(n)
    max_lag = int(reach.max())
    claimed = np.zeros(n, dtype=bool)
    for k in range(1, max_lag):
        lag = times[k:] - times[:-k]
        ok = is_a[:-k] & is_b[k:] & (lag < tau_max)
        if next_only:
            ok &= ~claimed[:-k]
            claimed[:-k] |= ok
        idx = (lag[ok] / bin_width).astype(np.int64)
        idx = idx[idx < n_bins]
        counts += np.bincount(idx, minlength=n_bins)
    return counts


def pair_histogram(times, is_a, is_b, bin_width, n_bins, next_only=False):
    """Histogram of delays from each A-click to later B-clicks within one stream."""
    times = np.ascontiguousarray(times, dtype=float)
    is_a = np.ascontiguousarray(is_a, dtype=np.bool_)
    is_b = np.ascontiguousarray(is_b, dtype=np.bool_)
    if USE_NUMBA:
        return _pair_hist_loop(times, is_a, is_b, float(bin_width), int(n_bins), bool(next_only))
    return _pair_hist_numpy(times, is_a, is_b, float(bin_width), int(n_bins), bool(next_only))
