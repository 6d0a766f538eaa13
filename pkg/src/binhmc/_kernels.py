"""Event loops shared by the binary samplers.

Every routine here is plain Python over numpy arrays. The ``*_nb`` twins are
the same code compiled with numba for the built-in targets, where
``target_delta`` dispatches on a kind code in ``params``. The ``*_py``
twins rebind ``target_delta`` so that ``params`` is any ``BinaryTarget``.
Either way ``target_delta(s, j, params)`` is
``log f(s_j=+1) - log f(s_j=-1)``.

Event rows written to ``events`` are ``(t, j, delta, q_before, q_after, crossed)``.
"""
import heapq
import math
import types

import numpy as np
from numba import njit

PI = math.pi
DELTA_CLAMP = 1e300
TIE_TOL = 1e-12
ZERO_NUDGE = 1e-12

_jit = njit(cache=True)


ISING = 0
TABULAR = 1


def ising_params(neighbors, beta):
    return (ISING, neighbors.astype(np.int64), float(beta), np.empty(0))


def tabular_params(log_weights):
    return (TABULAR, np.empty((0, 0), dtype=np.int64), 0.0, log_weights.astype(np.float64))


@_jit
def target_delta(s, j, params):
    kind, nbr, beta, logw = params
    if kind == ISING:
        acc = 0.0
        for k in range(nbr.shape[1]):
            acc += s[nbr[j, k]]
        return 2.0 * beta * acc
    idx = 0
    for i in range(s.shape[0]):
        if s[i] > 0:
            idx |= 1 << i
    return logw[idx | (1 << j)] - logw[idx & ~(1 << j)]


@_jit
def _jump(s_j, dl):
    # energy released when coordinate j leaves its current orthant
    dj = -dl if s_j > 0 else dl
    if dj != dj:
        raise ValueError("non-finite log-ratio at a wall")
    if dj > DELTA_CLAMP:
        dj = DELTA_CLAMP
    elif dj < -DELTA_CLAMP:
        dj = -DELTA_CLAMP
    return dj


@_jit
def _cross(q_before, dj):
    kin = q_before * q_before + 2.0 * dj
    if kin > 0.0:
        mag = math.sqrt(kin)
        return (mag if q_before > 0 else -mag), True
    return -q_before, False


@_jit
def _record(events, n, t, j, dj, qb, qa, crossed):
    if n < events.shape[0]:
        events[n, 0] = t
        events[n, 1] = j
        events[n, 2] = dj
        events[n, 3] = qb
        events[n, 4] = qa
        events[n, 5] = 1.0 if crossed else 0.0


@_jit
def _fix_sign(y, s):
    for i in range(y.shape[0]):
        if y[i] == 0.0 or (y[i] > 0.0) != (s[i] > 0):
            y[i] = s[i] * ZERO_NUDGE


@_jit
def gauss_first_hit(y0, q0):
    """Return (amplitude, first positive time at which y(t) = y0 cos t + q0 sin t is 0)."""
    amp = math.sqrt(y0 * y0 + q0 * q0)
    phi = math.atan2(y0, q0)
    if phi <= 0.0:
        t = -phi
    else:
        t = PI - phi
    if t <= 0.0:
        t += PI
    return amp, t


@_jit
def exp_first_hit_time(y0, q0, s):
    root = math.sqrt(q0 * q0 + 2.0 * abs(y0))
    sq = s * q0
    if sq >= 0.0:
        return sq + root
    return 2.0 * abs(y0) / (root - sq)


def gauss_trajectory(y, q, s, T, params, events):
    """Gaussian-augmentation trajectory of length T, updating y, q, s in place.

    Returns (n_hits, n_crossings, log_f_change).
    """
    d = y.shape[0]
    first = np.empty(d)
    amp = np.empty(d)
    t0 = np.zeros(d)
    a = y.copy()
    b = q.copy()
    for i in range(d):
        amp[i], first[i] = gauss_first_hit(a[i], b[i])

    order = np.argsort(first, kind="mergesort")
    # near-simultaneous hits go in ascending coordinate order
    start = 0
    for k in range(1, d + 1):
        if k == d or first[order[k]] - first[order[start]] > TIE_TOL:
            if k - start > 1:
                order[start:k] = np.sort(order[start:k])
            start = k

    n_hits = 0
    n_cross = 0
    dlogf = 0.0
    rnd = 0
    done = False
    while not done:
        base = rnd * PI
        for k in range(d):
            j = order[k]
            t = first[j] + base
            if t >= T:
                done = True
                break
            qb = -s[j] * amp[j]
            dj = _jump(s[j], target_delta(s, j, params))
            qa, crossed = _cross(qb, dj)
            if crossed:
                s[j] = -s[j]
                n_cross += 1
                dlogf += dj
            _record(events, n_hits, t, j, dj, qb, qa, crossed)
            n_hits += 1
            t0[j] = t
            a[j] = 0.0
            b[j] = qa
            amp[j] = abs(qa)
        rnd += 1

    for i in range(d):
        dt = T - t0[i]
        c = math.cos(dt)
        sn = math.sin(dt)
        y[i] = a[i] * c + b[i] * sn
        q[i] = -a[i] * sn + b[i] * c
    _fix_sign(y, s)
    return n_hits, n_cross, dlogf


def exp_trajectory(y, q, s, T, params, events):
    """Exponential-augmentation trajectory driven by a min-time event queue."""
    d = y.shape[0]
    t0 = np.zeros(d)
    y0 = y.copy()
    q0 = q.copy()
    heap = [(exp_first_hit_time(y0[0], q0[0], s[0]), 0)]
    for i in range(1, d):
        heap.append((exp_first_hit_time(y0[i], q0[i], s[i]), i))
    heapq.heapify(heap)

    n_hits = 0
    n_cross = 0
    dlogf = 0.0
    while len(heap) > 0:
        t, j = heap[0]
        if t >= T:
            break
        heapq.heappop(heap)
        qb = -s[j] * math.sqrt(q0[j] * q0[j] + 2.0 * abs(y0[j]))
        dj = _jump(s[j], target_delta(s, j, params))
        qa, crossed = _cross(qb, dj)
        if crossed:
            s[j] = -s[j]
            n_cross += 1
            dlogf += dj
        _record(events, n_hits, t, j, dj, qb, qa, crossed)
        n_hits += 1
        t0[j] = t
        y0[j] = 0.0
        q0[j] = qa
        heapq.heappush(heap, (t + 2.0 * abs(qa), j))

    for i in range(d):
        dt = T - t0[i]
        y[i] = y0[i] + q0[i] * dt - 0.5 * s[i] * dt * dt
        q[i] = q0[i] - s[i] * dt
    _fix_sign(y, s)
    return n_hits, n_cross, dlogf


def hmc_block(gaussian, y, momenta, s, T, params, keep, out_s, out_stats, acc):
    """Run one trajectory per row of ``momenta``; store spins at rows flagged in ``keep``.

    ``acc`` carries (hits, crossings, log_f) across blocks; ``out_stats`` rows
    receive (log_f, hits, crossings) accumulated since the previous stored row.
    """
    events = np.empty((0, 6))
    r = 0
    for b in range(momenta.shape[0]):
        q = momenta[b].copy()
        if gaussian:
            h, c, dl = gauss_trajectory(y, q, s, T, params, events)
        else:
            h, c, dl = exp_trajectory(y, q, s, T, params, events)
        acc[0] += h
        acc[1] += c
        acc[2] += dl
        if keep[b]:
            out_s[r, :] = s
            out_stats[r, 0] = acc[2]
            out_stats[r, 1] = acc[0]
            out_stats[r, 2] = acc[1]
            acc[0] = 0.0
            acc[1] = 0.0
            r += 1
    return r


def metropolis_block(s, idx, u, params, keep, out_s, out_stats, acc):
    """Single-flip Metropolis; row b of ``idx``/``u`` holds the proposals of one recorded sample."""
    r = 0
    for b in range(idx.shape[0]):
        for k in range(idx.shape[1]):
            j = idx[b, k]
            dl = target_delta(s, j, params)
            lr = -dl if s[j] > 0 else dl
            if lr >= 0.0 or u[b, k] < math.exp(lr):
                s[j] = -s[j]
                acc[1] += 1.0
                acc[2] += lr
            acc[0] += 1.0
        if keep[b]:
            out_s[r, :] = s
            out_stats[r, 0] = acc[2]
            out_stats[r, 1] = acc[0]
            out_stats[r, 2] = acc[1]
            acc[0] = 0.0
            acc[1] = 0.0
            r += 1
    return r


def _python_delta(s, j, target):
    return target.delta_log_f(s, j)


def _rebind(fn, **names):
    env = dict(fn.__globals__)
    env.update(names)
    return types.FunctionType(fn.__code__, env, fn.__name__, fn.__defaults__)


gauss_trajectory_nb = _jit(gauss_trajectory)
exp_trajectory_nb = _jit(exp_trajectory)
hmc_block_nb = _jit(
    _rebind(hmc_block, gauss_trajectory=gauss_trajectory_nb, exp_trajectory=exp_trajectory_nb)
)
metropolis_block_nb = _jit(metropolis_block)

gauss_trajectory_py = _rebind(gauss_trajectory, target_delta=_python_delta)
exp_trajectory_py = _rebind(exp_trajectory, target_delta=_python_delta)
hmc_block_py = _rebind(
    hmc_block, gauss_trajectory=gauss_trajectory_py, exp_trajectory=exp_trajectory_py
)
metropolis_block_py = _rebind(metropolis_block, target_delta=_python_delta)
