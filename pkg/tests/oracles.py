"""Independent reference computations used by the tests.

Each helper recomputes a quantity from its definition with different code
paths than the package (explicit loops, generic quadrature, dense inverses).
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, optimize
from scipy.special import log_ndtr


def ising_log_f_bonds(s, shape, beta):
    """-beta * energy by listing every forward periodic bond one by one."""
    s = np.asarray(s).reshape(shape)
    total = 0
    if len(shape) == 1:
        (d,) = shape
        for i in range(d):
            total += s[i] * s[(i + 1) % d]
    else:
        L = shape[0]
        for r in range(L):
            for c in range(L):
                total += s[r, c] * s[r, (c + 1) % L]
                total += s[r, c] * s[(r + 1) % L, c]
    return beta * float(total)


def first_root(fn, t_max, grid=20001):
    """Earliest t in (0, t_max] with fn(t) = 0, via a sign scan then Brent."""
    ts = np.linspace(0.0, t_max, grid)[1:]
    vals = np.array([fn(t) for t in ts])
    prev_t, prev_v = 1e-12, fn(1e-12)
    for t, v in zip(ts, vals):
        if v == 0.0:
            return t
        if np.sign(v) != np.sign(prev_v):
            return optimize.brentq(fn, prev_t, t, xtol=1e-14)
        prev_t, prev_v = t, v
    return None


def ss_hamiltonian_dense(M, r, tau2, w, g, s):
    """U + K for orthant s using dense inverses and slogdet.

    U = w_A'(M_AA + I/tau2)w_A/2 - r_A.w_A + sum_E w^2/(2 tau2)
    K = g'(mass^-1)g/2 + log|mass|/2, mass = blockdiag(M_AA + I/tau2, I/tau2)
    """
    s = np.asarray(s)
    A = np.flatnonzero(s > 0)
    E = np.flatnonzero(s < 0)
    P = M[np.ix_(A, A)] + np.eye(A.size) / tau2
    u = 0.5 * w[A] @ P @ w[A] - r[A] @ w[A] + np.sum(w[E] ** 2) / (2 * tau2)
    k = 0.5 * g[A] @ np.linalg.inv(P) @ g[A] + 0.5 * tau2 * np.sum(g[E] ** 2)
    logdet = (np.linalg.slogdet(P)[1] if A.size else 0.0) - E.size * math.log(tau2)
    return float(u + k + 0.5 * logdet)


def ss_marginal_quadrature(M, r, a, tau2, lower=None):
    """p(s) for d <= 2 by numerically integrating the slab coefficients.

    ``lower`` optionally bounds each coefficient from below (e.g. 0 for
    positivity); patterns whose excluded coordinates violate it get 0.
    States follow the package's ``all_states`` order (bit i of the index is s_i).
    """
    M = np.asarray(M, float)
    r = np.asarray(r, float)
    d = r.shape[0]
    lo = np.full(d, -np.inf) if lower is None else np.asarray(lower, float)
    # integrate in a window around the unconstrained posterior mean
    P = M + np.eye(d) / tau2
    m = np.linalg.solve(P, r)
    sd = np.sqrt(np.diag(np.linalg.inv(P)))
    ub = m + 12 * sd
    lb = np.maximum(lo, m - 12 * sd)
    c = 0.5 * r @ m  # shift to keep exponentials in range
    weights = []
    for idx in range(2**d):
        s = np.array([1 if (idx >> i) & 1 else -1 for i in range(d)])
        inc = np.flatnonzero(s > 0)
        k = inc.size
        if np.any(lo[s < 0] > 0):
            weights.append(0.0)
            continue

        def dens(*wv):
            w = np.zeros(d)
            w[inc] = wv
            val = -0.5 * w @ M @ w + r @ w - 0.5 * (w @ w) / tau2 - c
            return math.exp(val) / (2 * math.pi * tau2) ** (k / 2)

        if k == 0:
            val = math.exp(-c)
        elif k == 1:
            i = inc[0]
            val = integrate.quad(dens, lb[i], ub[i], epsabs=0, epsrel=1e-11, limit=200)[0]
        else:
            val = integrate.dblquad(
                lambda w2, w1: dens(w1, w2), lb[0], ub[0], lb[1], ub[1], epsabs=0, epsrel=1e-10
            )[0]
        weights.append(a**k * (1 - a) ** (d - k) * val)
    p = np.array(weights)
    return p / p.sum()


def probit_inclusion_quadrature(X, b, a, tau2):
    """P(s = +1 | b) for a single-coefficient probit model by quadrature over w."""
    x = np.asarray(X, float)[:, 0]
    b = np.asarray(b, float)
    tau = math.sqrt(tau2)

    def integrand(w):
        return math.exp(np.sum(log_ndtr(-b * x * w)) - 0.5 * w * w / tau2) / (math.sqrt(2 * math.pi) * tau)

    slab = integrate.quad(integrand, -12 * tau, 12 * tau, epsabs=0, epsrel=1e-11, limit=400)[0]
    spike = 0.5 ** x.shape[0]
    return a * slab / (a * slab + (1 - a) * spike)


def ar1(n, phi, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / math.sqrt(1 - phi * phi)
    e = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def all_spin_patterns(d):
    return [np.array(p) for p in itertools.product((-1, 1), repeat=d)]
