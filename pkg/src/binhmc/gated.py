"""Exact HMC over piecewise Gaussians whose pieces are indexed by spin orthants.

The continuous vector x has fixed coordinates, always governed by the shared
quadratic form, and gated coordinates w_j. A gated coordinate belongs to the
quadratic form when s_j = +1 and is an independent N(0, tau2) replica when
s_j = -1. Spins are the signs of auxiliary coordinates y with a standard
Gaussian augmentation. Linear inequality constraints F x + c >= 0 act on the
whole of x, replicas included.

With the orthant-dependent mass matrix (the active block's covariance, tau2
for replicas) every coordinate moves on a unit-frequency sinusoid, so the
only events are y-walls and constraint walls.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import ndtr

from ._kernels import _cross, _jump
from .hmc import spins_of

TWO_PI = 2.0 * math.pi
# contact tolerance for constraint values at the current instant
CONTACT_TOL = 1e-10
MAX_EVENTS = 1_000_000
_CACHE_SIZE = 512


@dataclass(frozen=True)
class LinearConstraint:
    """Half-space f . x + c >= 0."""

    f: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 1 or not np.all(np.isfinite(f)) or not np.any(f != 0):
            raise ValueError("constraint normal must be a finite nonzero vector")
        if not math.isfinite(self.c):
            raise ValueError("constraint offset must be finite")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "c", float(self.c))

    def value(self, x) -> float:
        return float(self.f @ x + self.c)


def positivity(d: int) -> tuple[LinearConstraint, ...]:
    """w_i >= 0 for every coordinate."""
    return tuple(LinearConstraint(np.eye(d)[i]) for i in range(d))


def stack_constraints(constraints, n: int, offset: int = 0):
    """Constraint matrix F (m x n) and offsets c, placing each normal at ``offset``."""
    m = len(constraints)
    F = np.zeros((m, n))
    c = np.zeros(m)
    for k, con in enumerate(constraints):
        if offset + con.f.shape[0] > n:
            raise ValueError(f"constraint {k} has length {con.f.shape[0]}, too long")
        F[k, offset : offset + con.f.shape[0]] = con.f
        c[k] = con.c
    return F, c


@dataclass(frozen=True)
class OrthantParams:
    """Gaussian piece for one spin pattern.

    ``active`` indexes x (fixed coordinates plus included gated ones); ``chol``
    is the lower Cholesky factor of the active precision, ``mu`` the full-length
    centre (zero on replicas) and ``logdet_sigma`` = log |Sigma_active|.
    """

    spins: np.ndarray
    active: np.ndarray
    excluded: np.ndarray
    chol: np.ndarray
    precision: np.ndarray
    mu: np.ndarray
    logdet_sigma: float

    @property
    def n_included(self) -> int:
        return int(np.sum(self.spins > 0))

    def covariance_times(self, v):
        """Sigma_active @ v."""
        if v.shape[0] == 0:
            return v.copy()
        return cho_solve((self.chol, True), v)


def _constraint_times(alpha, beta, gamma):
    """Earliest t in (0, 2 pi] at which alpha cos t + beta sin t + gamma turns negative.

    Entries that never reach zero get +inf.
    """
    R = np.hypot(alpha, beta)
    out = np.full(alpha.shape, np.inf)
    reach = R > gamma
    if not reach.any():
        return out
    Rr = R[reach]
    ratio = np.clip(-gamma[reach] / Rr, -1.0, 1.0)
    t = np.mod(np.arctan2(beta[reach], alpha[reach]) + np.arccos(ratio), TWO_PI)
    value = alpha[reach] + gamma[reach]
    slope = beta[reach]
    now = (value <= CONTACT_TOL) & (slope < 0.0)
    t = np.where(now, 0.0, np.where(t < 1e-12, TWO_PI, t))
    out[reach] = t
    return out


def constraint_hit_time(alpha: float, beta: float, gamma: float) -> float | None:
    """First t > 0 where alpha cos t + beta sin t + gamma reaches 0 heading negative.

    The start value alpha + gamma must be nonnegative. Returns None when the
    sinusoid never reaches the wall.
    """
    if alpha + gamma < -CONTACT_TOL:
        raise ValueError("start point violates the constraint")
    t = _constraint_times(np.array([alpha], float), np.array([beta], float), np.array([gamma], float))[0]
    return None if math.isinf(t) else float(t)


def _y_times(y, q, s):
    """Time until each y_i next reaches 0; wrong-side coordinates hit immediately."""
    phi = np.arctan2(y, q)
    t = np.where(phi <= 0.0, -phi, math.pi - phi)
    t = np.where(t <= 0.0, t + math.pi, t)
    sq = s * q
    wrong = (s * y < 0.0) | ((y == 0.0) & (sq < 0.0))
    return np.where(wrong, 0.0, t)


@dataclass
class SegmentStats:
    y_hits: int = 0
    crossings: int = 0
    constraint_hits: int = 0
    energy_start: float = math.nan
    energy_end: float = math.nan

    @property
    def hits(self) -> int:
        return self.y_hits + self.constraint_hits


class GatedGaussian:
    """Piecewise Gaussian with spin-gated coordinates; see the module docstring.

    ``Q`` and ``r`` give the full quadratic form -x'Qx/2 + r.x; the slab
    precision 1/tau2 must already be on the gated diagonal. With
    ``normalize_replicas`` each replica's density is divided by its N(0, tau2)
    mass inside the bounds set by single-coordinate constraints, so that
    truncating replicas does not tilt the spin marginal.
    """

    def __init__(self, Q, r, gated, tau2, a, F=None, c=None, normalize_replicas=True):
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        if Q.shape != (n, n) or not np.allclose(Q, Q.T, atol=1e-10):
            raise ValueError("Q must be a symmetric square matrix")
        if not (0.0 < a < 1.0):
            raise ValueError("a must lie in (0, 1)")
        if not tau2 > 0:
            raise ValueError("tau2 must be positive")
        self.Q = 0.5 * (Q + Q.T)
        self.r = np.asarray(r, dtype=float).reshape(n)
        self.n = n
        self.gated = np.asarray(gated, dtype=np.int64)
        self.d = self.gated.shape[0]
        is_gated = np.zeros(n, dtype=bool)
        is_gated[self.gated] = True
        self.fixed = np.flatnonzero(~is_gated)
        self.tau2 = float(tau2)
        self.a = float(a)
        self.logit_a = math.log(a / (1.0 - a))
        self.F = np.zeros((0, n)) if F is None else np.asarray(F, dtype=float).reshape(-1, n)
        self.c = np.zeros(self.F.shape[0]) if c is None else np.asarray(c, dtype=float)
        self.log_z = self._replica_log_mass() if normalize_replicas else np.zeros(self.d)
        self._cache: dict[bytes, OrthantParams] = {}

    def _replica_log_mass(self):
        """log N(0, tau2) mass of each gated coordinate's separable bounds (0 if none)."""
        out = np.zeros(self.d)
        tau = math.sqrt(self.tau2)
        for j, col in enumerate(self.gated):
            rows = np.flatnonzero(self.F[:, col] != 0)
            lo, hi = -math.inf, math.inf
            for k in rows:
                if np.count_nonzero(self.F[k]) != 1:
                    break
                b = -self.c[k] / self.F[k, col]
                if self.F[k, col] > 0:
                    lo = max(lo, b)
                else:
                    hi = min(hi, b)
            else:
                if rows.size:
                    out[j] = math.log(max(float(ndtr(hi / tau) - ndtr(lo / tau)), 1e-300))
        return out

    def orthant(self, s) -> OrthantParams:
        s = np.asarray(s)
        key = s.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        incl = self.gated[s > 0]
        active = np.sort(np.concatenate([self.fixed, incl]))
        excluded = np.sort(self.gated[s < 0])
        P = self.Q[np.ix_(active, active)]
        try:
            L = cholesky(P, lower=True) if active.size else np.zeros((0, 0))
        except LinAlgError as err:
            raise LinAlgError(f"active precision is not positive definite ({active.size} dims)") from err
        mu = np.zeros(self.n)
        if active.size:
            mu[active] = cho_solve((L, True), self.r[active])
        logdet = -2.0 * float(np.sum(np.log(np.diag(L))))
        out = OrthantParams(s.copy(), active, excluded, L, P, mu, logdet)
        if len(self._cache) >= _CACHE_SIZE:
            self._cache.clear()
        self._cache[key] = out
        return out

    def energy_wg(self, x, g, s, orth=None) -> float:
        """Continuous-coordinate Hamiltonian for orthant s at (x, g)."""
        orth = self.orthant(s) if orth is None else orth
        A, E = orth.active, orth.excluded
        xa, ga = x[A], g[A]
        h = 0.5 * xa @ orth.precision @ xa - self.r[A] @ xa
        h += 0.5 * ga @ orth.covariance_times(ga) - 0.5 * orth.logdet_sigma
        xe, ge = x[E], g[E]
        h += (xe @ xe) / (2.0 * self.tau2) + 0.5 * self.tau2 * (ge @ ge)
        h += float(self.log_z[orth.spins < 0].sum())
        h -= 0.5 * E.size * math.log(self.tau2)
        return float(h)

    def prior_energy(self, s) -> float:
        k = int(np.sum(np.asarray(s) > 0))
        return -k * math.log(self.a) - (self.d - k) * math.log1p(-self.a)

    def energy(self, x, g, y, q, s) -> float:
        """Total Hamiltonian including the y part and the inclusion prior."""
        return 0.5 * float(y @ y + q @ q) + self.energy_wg(x, g, s) + self.prior_energy(s)

    def log_ratio(self, x, g, s, j) -> float:
        """Log density ratio across the y_j wall: up minus down, at fixed (x, g)."""
        up = np.array(s, copy=True)
        down = np.array(s, copy=True)
        up[j] = 1
        down[j] = -1
        return self.energy_wg(x, g, down) - self.energy_wg(x, g, up) + self.logit_a

    def momentum(self, xdot, orth) -> np.ndarray:
        g = np.empty(self.n)
        g[orth.active] = orth.precision @ xdot[orth.active]
        g[orth.excluded] = xdot[orth.excluded] / self.tau2
        return g

    def velocity(self, g, orth) -> np.ndarray:
        v = np.empty(self.n)
        v[orth.active] = orth.covariance_times(g[orth.active])
        v[orth.excluded] = self.tau2 * g[orth.excluded]
        return v

    def refresh(self, s, rng):
        """Fresh y-momenta q ~ N(0, I) and velocities xdot ~ N(0, blockdiag(Sigma, tau2 I))."""
        orth = self.orthant(s)
        q = rng.standard_normal(self.d)
        z = rng.standard_normal(self.n)
        xdot = np.empty(self.n)
        A, E = orth.active, orth.excluded
        if A.size:
            xdot[A] = solve_triangular(orth.chol.T, z[A], lower=False)
        xdot[E] = math.sqrt(self.tau2) * z[E]
        return q, xdot

    def reflect(self, xdot, f, orth) -> np.ndarray:
        """Elastic reflection of the velocity off the wall with normal f."""
        sf = self.velocity(f, orth)
        denom = float(f @ sf)
        if not denom > 0:
            raise FloatingPointError("wall normal has nonpositive metric norm")
        return xdot - 2.0 * float(f @ xdot) / denom * sf

    def check_feasible(self, x, tol=CONTACT_TOL):
        if self.F.shape[0] and np.min(self.F @ x + self.c) < -tol:
            k = int(np.argmin(self.F @ x + self.c))
            raise ValueError(f"state violates constraint {k}")

    def trajectory(self, x, xdot, y, q, s, T, check_energy=False) -> SegmentStats:
        """Move (x, y) for time T, updating x, xdot, y, q, s in place."""
        stats = SegmentStats()
        orth = self.orthant(s)
        if check_energy:
            stats.energy_start = self.energy(x, self.momentum(xdot, orth), y, q, s)
        has_walls = self.F.shape[0] > 0
        t = 0.0
        n_events = 0
        while True:
            mu = orth.mu
            A = x - mu
            B = xdot
            ty = _y_times(y, q, s)
            jy = int(np.argmin(ty))
            dt = float(ty[jy])
            kc = -1
            if has_walls:
                tc = _constraint_times(self.F @ A, self.F @ B, self.F @ mu + self.c)
                k = int(np.argmin(tc))
                if tc[k] < dt:
                    dt, kc = float(tc[k]), k
            last = dt >= T - t
            if last:
                dt = T - t
            cs, sn = math.cos(dt), math.sin(dt)
            x[:] = mu + A * cs + B * sn
            xdot[:] = -A * sn + B * cs
            y0 = y.copy()
            y[:] = y0 * cs + q * sn
            q[:] = -y0 * sn + q * cs
            if last:
                break
            t += dt
            n_events += 1
            if n_events > MAX_EVENTS:
                raise RuntimeError("event limit exceeded in one trajectory")
            if kc < 0:
                orth = self._wall(x, xdot, y, q, s, jy, orth, stats)
            else:
                f = self.F[kc]
                x -= (f @ x + self.c[kc]) / (f @ f) * f
                xdot[:] = self.reflect(xdot, f, orth)
                stats.constraint_hits += 1

        for i in range(self.d):
            if y[i] == 0.0 or (y[i] > 0.0) != (s[i] > 0):
                y[i] = s[i] * 1e-12
        if check_energy:
            stats.energy_end = self.energy(x, self.momentum(xdot, orth), y, q, s)
        return stats

    def _wall(self, x, xdot, y, q, s, j, orth, stats):
        qb = -s[j] * math.hypot(y[j], q[j])
        y[j] = 0.0
        g = self.momentum(xdot, orth)
        dj = _jump(s[j], self.log_ratio(x, g, s, j))
        qa, crossed = _cross(qb, dj)
        q[j] = qa
        stats.y_hits += 1
        if crossed:
            s[j] = -s[j]
            stats.crossings += 1
            orth = self.orthant(s)
            xdot[:] = self.velocity(g, orth)
        return orth

    def step(self, x, y, T, rng, check_energy=False):
        """One iteration: refresh momenta at (x, y) and integrate for time T.

        Returns (x', y', s', stats); the inputs are not modified.
        """
        x = np.array(x, dtype=float)
        y = np.array(y, dtype=float)
        y[y == 0.0] = 1e-12
        s = spins_of(y)
        self.check_feasible(x)
        q, xdot = self.refresh(s, rng)
        stats = self.trajectory(x, xdot, y, q, s, T, check_energy=check_energy)
        return x, y, s, stats


def run_chain(engine, x, y, T, n_samples, burn_in, thin, rng, record_timing, observe):
    """Iterate ``engine.step`` and collect kept rows.

    ``observe(x, y)`` maps a kept state to (spins, coefficients, log_post,
    latent); latent may be None. Returns per-row arrays, the final (x, y) and
    the per-row cost counters.
    """
    if n_samples <= 0 or thin < 1 or burn_in < 0:
        raise ValueError("need n_samples > 0, thin >= 1, burn_in >= 0")
    if not T > 0:
        raise ValueError("travel time must be positive")
    rows = []
    cost = np.zeros((n_samples, 3), dtype=np.int64)
    h = c = ns = 0
    for it in range(burn_in + n_samples * thin):
        t0 = time.perf_counter_ns() if record_timing else 0
        x, y, _, st = engine.step(x, y, T, rng)
        if record_timing:
            ns += time.perf_counter_ns() - t0
        h += st.hits
        c += st.crossings
        if it >= burn_in and (it - burn_in) % thin == thin - 1:
            cost[len(rows)] = (h, c, ns)
            rows.append(observe(x, y))
            h = c = ns = 0
    spins, coef, logp, latent = zip(*rows)
    out = {
        "spins": np.array(spins, dtype=np.int8),
        "coefficients": np.array(coef),
        "log_target": np.array(logp),
        "latent": None if latent[0] is None else np.array(latent),
        "wall_hits": cost[:, 0],
        "crossings": cost[:, 1],
        "elapsed_ns": cost[:, 2],
    }
    return out, x, y
